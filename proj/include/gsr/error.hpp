#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gsr {

// Base of every error raised by the library. The category maps onto CLI exit
// codes: validation -> 1, numerical -> 2, io -> 3.
class Error : public std::runtime_error {
public:
    enum class Category { validation, numerical, io };

    Error(Category category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    Category category() const noexcept { return category_; }

private:
    Category category_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what)
        : Error(Category::validation, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what)
        : Error(Category::numerical, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(Category::io, what) {}
};

// Raised while reading an embedding file. `row` is the zero-based data row
// (header excluded); `npos` when the problem is not tied to a row.
class ParseError : public ValidationError {
public:
    enum class Kind {
        empty_file,
        bad_header,
        malformed_row,
        non_finite_feature,
        label_out_of_range,
        group_out_of_range,
        missing_group,
        bad_manifest,
    };

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    ParseError(Kind kind, std::size_t row, const std::string& what)
        : ValidationError(what), kind_(kind), row_(row) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t row() const noexcept { return row_; }

private:
    Kind kind_;
    std::size_t row_;
};

}  // namespace gsr
