#include "gsr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gsr/error.hpp"
#include "gsr/rng.hpp"

namespace gsr {

EmbeddingDataset::EmbeddingDataset(FeatureMatrix features,
                                   std::vector<int> labels,
                                   std::optional<std::vector<int>> groups,
                                   int num_classes, int num_groups)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      groups_(std::move(groups)),
      num_classes_(num_classes),
      num_groups_(num_groups) {
    const auto n = labels_.size();
    if (n == 0) throw ValidationError("dataset must contain at least one sample");
    if (features_.cols() < 1) throw ValidationError("feature dimension must be >= 1");
    if (static_cast<std::size_t>(features_.rows()) != n)
        throw ValidationError("feature rows do not match label count");
    if (num_classes_ < 1) throw ValidationError("num_classes must be >= 1");
    if (!features_.allFinite())
        throw ValidationError("features contain non-finite values");
    for (std::size_t i = 0; i < n; ++i) {
        if (labels_[i] < 0 || labels_[i] >= num_classes_)
            throw ValidationError("label out of range at row " + std::to_string(i));
    }
    if (groups_) {
        if (groups_->size() != n)
            throw ValidationError("group column length does not match label count");
        if (num_groups_ < 1) throw ValidationError("num_groups must be >= 1 when groups are present");
        for (std::size_t i = 0; i < n; ++i) {
            const int g = (*groups_)[i];
            if (g < 0 || g >= num_groups_)
                throw ValidationError("group out of range at row " + std::to_string(i));
        }
    } else {
        num_groups_ = 0;
    }
}

const std::vector<int>& EmbeddingDataset::groups() const {
    if (!groups_) throw ValidationError("dataset has no group labels");
    return *groups_;
}

EmbeddingDataset EmbeddingDataset::subset(std::span<const std::size_t> rows) const {
    FeatureMatrix x(static_cast<Eigen::Index>(rows.size()), features_.cols());
    std::vector<int> y(rows.size());
    std::optional<std::vector<int>> g;
    if (groups_) g.emplace(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto src = rows[r];
        if (src >= size()) throw ValidationError("subset row index out of range");
        x.row(static_cast<Eigen::Index>(r)) = features_.row(static_cast<Eigen::Index>(src));
        y[r] = labels_[src];
        if (g) (*g)[r] = (*groups_)[src];
    }
    return EmbeddingDataset(std::move(x), std::move(y), std::move(g), num_classes_,
                            num_groups_);
}

EmbeddingDataset EmbeddingDataset::with_labels(std::vector<int> labels) const {
    return EmbeddingDataset(features_, std::move(labels), groups_, num_classes_,
                            num_groups_);
}

std::vector<std::size_t> EmbeddingDataset::group_counts() const {
    const auto& g = groups();
    std::vector<std::size_t> counts(static_cast<std::size_t>(num_groups_), 0);
    for (int id : g) ++counts[static_cast<std::size_t>(id)];
    return counts;
}

std::vector<std::vector<std::size_t>> EmbeddingDataset::rows_by_group() const {
    const auto& g = groups();
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_groups_));
    for (std::size_t i = 0; i < g.size(); ++i) out[static_cast<std::size_t>(g[i])].push_back(i);
    return out;
}

void require_groups(const EmbeddingDataset& ds, const char* what) {
    if (!ds.has_groups())
        throw ValidationError(std::string(what) + " requires group labels");
}

void SplitPlan::validate() const {
    if (!(heldout_fraction > 0.0 && heldout_fraction < 1.0))
        throw ValidationError("heldout_fraction must lie in (0, 1)");
}

int SyntheticSpec::num_attributes() const {
    return num_classes > 0 ? static_cast<int>(n_per_group.size()) / num_classes : 0;
}

void SyntheticSpec::validate() const {
    if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
    if (n_per_group.empty() || n_per_group.size() % static_cast<std::size_t>(num_classes) != 0)
        throw ValidationError("n_per_group size must be a positive multiple of num_classes");
    for (auto c : n_per_group)
        if (c < 1) throw ValidationError("n_per_group entries must be >= 1");
    if (d_core < 1) throw ValidationError("d_core must be >= 1");
    if (!(core_gap > 0.0)) throw ValidationError("core_gap must be > 0");
    if (!(spurious_gap >= 0.0)) throw ValidationError("spurious_gap must be >= 0");
    if (!(noise_std > 0.0)) throw ValidationError("noise_std must be > 0");
}

void NoiseSpec::validate() const {
    if (!(flip_fraction >= 0.0 && flip_fraction <= 1.0))
        throw ValidationError("flip_fraction must lie in [0, 1]");
}

std::size_t round_count(double value) {
    return static_cast<std::size_t>(std::round(value));
}

std::filesystem::path manifest_path(const std::filesystem::path& data_path) {
    auto p = data_path;
    p += ".manifest";
    return p;
}

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, delim)) out.push_back(field);
    if (!line.empty() && line.back() == delim) out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
    const auto t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_int(const std::string& s, long long& out) {
    const auto t = trim(s);
    if (t.empty()) return false;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size();
}

struct Manifest {
    std::optional<int> num_classes;
    std::optional<int> num_groups;
};

Manifest read_manifest(const std::filesystem::path& path) {
    Manifest m;
    std::ifstream in(path);
    if (!in) return m;
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(ParseError::Kind::bad_manifest, ParseError::npos,
                             "manifest line without '=': " + line);
        const auto key = trim(line.substr(0, eq));
        long long value = 0;
        if (!parse_int(line.substr(eq + 1), value) || value < 1)
            throw ParseError(ParseError::Kind::bad_manifest, ParseError::npos,
                             "manifest value for '" + key + "' must be a positive integer");
        if (key == "num_classes")
            m.num_classes = static_cast<int>(value);
        else if (key == "num_groups")
            m.num_groups = static_cast<int>(value);
    }
    return m;
}

}  // namespace

EmbeddingDataset load_embeddings(const std::filesystem::path& path,
                                 const EmbeddingSchema& schema) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file " + path.string());

    std::string line;
    if (!std::getline(in, line) || trim(line).empty())
        throw ParseError(ParseError::Kind::empty_file, ParseError::npos,
                         "empty embedding file " + path.string());

    const auto header = split_line(trim(line), schema.delimiter);
    std::vector<std::ptrdiff_t> feature_col;
    std::ptrdiff_t label_col = -1, group_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto name = trim(header[c]);
        if (name == schema.label_column) {
            label_col = static_cast<std::ptrdiff_t>(c);
        } else if (name == schema.group_column) {
            group_col = static_cast<std::ptrdiff_t>(c);
        } else if (name.rfind(schema.feature_prefix, 0) == 0) {
            long long idx = 0;
            if (!parse_int(name.substr(schema.feature_prefix.size()), idx) || idx < 0)
                throw ParseError(ParseError::Kind::bad_header, ParseError::npos,
                                 "unrecognised column '" + name + "'");
            if (static_cast<std::size_t>(idx) >= feature_col.size())
                feature_col.resize(static_cast<std::size_t>(idx) + 1, -1);
            feature_col[static_cast<std::size_t>(idx)] = static_cast<std::ptrdiff_t>(c);
        } else {
            throw ParseError(ParseError::Kind::bad_header, ParseError::npos,
                             "unrecognised column '" + name + "'");
        }
    }
    if (label_col < 0)
        throw ParseError(ParseError::Kind::bad_header, ParseError::npos,
                         "missing '" + schema.label_column + "' column");
    if (feature_col.empty() ||
        std::find(feature_col.begin(), feature_col.end(), -1) != feature_col.end())
        throw ParseError(ParseError::Kind::bad_header, ParseError::npos,
                         "feature columns must be " + schema.feature_prefix + "0.." +
                             schema.feature_prefix + "{d-1} without gaps");
    if (schema.require_groups && group_col < 0)
        throw ParseError(ParseError::Kind::missing_group, ParseError::npos,
                         "missing '" + schema.group_column + "' column");

    const auto manifest = read_manifest(manifest_path(path));
    const auto d = feature_col.size();

    std::vector<double> values;
    std::vector<int> labels;
    std::vector<int> groups;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_line(trim(line), schema.delimiter);
        if (fields.size() != header.size())
            throw ParseError(ParseError::Kind::malformed_row, row,
                             "malformed row at row " + std::to_string(row) + ": expected " +
                                 std::to_string(header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
        for (std::size_t j = 0; j < d; ++j) {
            double v = 0.0;
            if (!parse_double(fields[static_cast<std::size_t>(feature_col[j])], v))
                throw ParseError(ParseError::Kind::malformed_row, row,
                                 "malformed feature at row " + std::to_string(row));
            if (!std::isfinite(v))
                throw ParseError(ParseError::Kind::non_finite_feature, row,
                                 "non-finite feature at row " + std::to_string(row));
            values.push_back(v);
        }
        long long y = 0;
        if (!parse_int(fields[static_cast<std::size_t>(label_col)], y))
            throw ParseError(ParseError::Kind::malformed_row, row,
                             "malformed label at row " + std::to_string(row));
        if (y < 0 || (manifest.num_classes && y >= *manifest.num_classes))
            throw ParseError(ParseError::Kind::label_out_of_range, row,
                             "label out of range at row " + std::to_string(row));
        labels.push_back(static_cast<int>(y));
        if (group_col >= 0) {
            long long g = 0;
            if (!parse_int(fields[static_cast<std::size_t>(group_col)], g))
                throw ParseError(ParseError::Kind::malformed_row, row,
                                 "malformed group at row " + std::to_string(row));
            if (g < 0 || (manifest.num_groups && g >= *manifest.num_groups))
                throw ParseError(ParseError::Kind::group_out_of_range, row,
                                 "group out of range at row " + std::to_string(row));
            groups.push_back(static_cast<int>(g));
        }
        ++row;
    }
    if (row == 0)
        throw ParseError(ParseError::Kind::empty_file, ParseError::npos,
                         "embedding file has no data rows: " + path.string());

    const int k = manifest.num_classes.value_or(*std::max_element(labels.begin(), labels.end()) + 1);
    std::optional<std::vector<int>> group_opt;
    int m = 0;
    if (group_col >= 0) {
        m = manifest.num_groups.value_or(*std::max_element(groups.begin(), groups.end()) + 1);
        std::vector<bool> seen(static_cast<std::size_t>(m), false);
        for (int g : groups) seen[static_cast<std::size_t>(g)] = true;
        for (int g = 0; g < m; ++g)
            if (!seen[static_cast<std::size_t>(g)])
                throw ParseError(ParseError::Kind::group_out_of_range, ParseError::npos,
                                 "group " + std::to_string(g) + " has no samples");
        group_opt = std::move(groups);
    }

    FeatureMatrix x = Eigen::Map<FeatureMatrix>(values.data(), static_cast<Eigen::Index>(row),
                                                static_cast<Eigen::Index>(d));
    return EmbeddingDataset(std::move(x), std::move(labels), std::move(group_opt), k, m);
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    out.append(buf, ptr);
}

}  // namespace

void save_embeddings(const EmbeddingDataset& ds, const std::filesystem::path& path,
                     const EmbeddingSchema& schema) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write embedding file " + path.string());
    const char delim = schema.delimiter;
    std::string buf;
    for (std::size_t j = 0; j < ds.dim(); ++j) {
        buf += schema.feature_prefix + std::to_string(j);
        buf += delim;
    }
    buf += schema.label_column;
    if (ds.has_groups()) {
        buf += delim;
        buf += schema.group_column;
    }
    buf += '\n';
    const auto& x = ds.features();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t j = 0; j < ds.dim(); ++j) {
            append_double(buf, x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
            buf += delim;
        }
        buf += std::to_string(ds.labels()[i]);
        if (ds.has_groups()) {
            buf += delim;
            buf += std::to_string(ds.groups()[i]);
        }
        buf += '\n';
    }
    out << buf;
    if (!out) throw IoError("failed writing " + path.string());

    std::ofstream man(manifest_path(path), std::ios::binary);
    if (!man) throw IoError("cannot write manifest for " + path.string());
    man << "num_classes = " << ds.num_classes() << '\n';
    if (ds.has_groups()) man << "num_groups = " << ds.num_groups() << '\n';
}

namespace {

DatasetSplit make_split(const EmbeddingDataset& ds, std::vector<std::size_t> first,
                        std::vector<std::size_t> second) {
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    auto a = ds.subset(first);
    auto b = ds.subset(second);
    return DatasetSplit{std::move(a), std::move(b), std::move(first), std::move(second)};
}

}  // namespace

DatasetSplit split_holdout(const EmbeddingDataset& ds, const SplitPlan& plan) {
    plan.validate();
    const auto n = ds.size();
    const auto n_held = round_count(plan.heldout_fraction * static_cast<double>(n));
    if (n_held == 0 || n_held >= n)
        throw ValidationError("heldout_fraction yields an empty split");

    Rng rng(plan.seed);
    std::vector<std::size_t> held, rest;
    if (!plan.stratify_by_group) {
        const auto perm = rng.permutation(n);
        held.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_held));
        rest.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_held), perm.end());
        return make_split(ds, std::move(held), std::move(rest));
    }

    require_groups(ds, "stratified split");
    auto strata = ds.rows_by_group();
    // Largest-remainder apportionment of n_held over the groups; ties go to
    // the smaller group id.
    std::vector<std::size_t> quota(strata.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < strata.size(); ++g) {
        const double exact = static_cast<double>(strata[g].size()) * static_cast<double>(n_held) /
                             static_cast<double>(n);
        quota[g] = static_cast<std::size_t>(std::floor(exact));
        assigned += quota[g];
        remainders.emplace_back(exact - std::floor(exact), g);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n_held; ++r, ++assigned) ++quota[remainders[r].second];

    for (std::size_t g = 0; g < strata.size(); ++g) {
        if (strata[g].empty()) continue;
        if (quota[g] < 1)
            throw ValidationError("stratum for group " + std::to_string(g) +
                                  " receives fewer than one held-out sample");
        rng.shuffle(std::span<std::size_t>(strata[g]));
        held.insert(held.end(), strata[g].begin(),
                    strata[g].begin() + static_cast<std::ptrdiff_t>(quota[g]));
        rest.insert(rest.end(), strata[g].begin() + static_cast<std::ptrdiff_t>(quota[g]),
                    strata[g].end());
    }
    return make_split(ds, std::move(held), std::move(rest));
}

DatasetSplit split_target_val(const EmbeddingDataset& ds, std::uint64_t seed, bool stratify) {
    require_groups(ds, "split_target_val");
    auto strata = ds.rows_by_group();
    for (std::size_t g = 0; g < strata.size(); ++g)
        if (strata[g].size() < 2)
            throw ValidationError("group " + std::to_string(g) +
                                  " needs at least 2 samples to split into target/validation");

    Rng rng(seed);
    std::vector<std::size_t> target, val;
    if (!stratify) {
        const auto perm = rng.permutation(ds.size());
        const auto half = (ds.size() + 1) / 2;
        target.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
        val.assign(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());
        return make_split(ds, std::move(target), std::move(val));
    }

    // Odd-sized groups alternate which side receives the extra sample, so the
    // two totals differ by at most one.
    bool extra_to_target = true;
    for (auto& rows : strata) {
        rng.shuffle(std::span<std::size_t>(rows));
        auto take = rows.size() / 2;
        if (rows.size() % 2 == 1) {
            if (extra_to_target) ++take;
            extra_to_target = !extra_to_target;
        }
        target.insert(target.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
        val.insert(val.end(), rows.begin() + static_cast<std::ptrdiff_t>(take), rows.end());
    }
    return make_split(ds, std::move(target), std::move(val));
}

namespace {

// Evenly spaced code in [-1, 1] for index k of count levels (+-1 when binary).
double level_code(int k, int count) {
    if (count <= 1) return 0.0;
    return 2.0 * static_cast<double>(k) / static_cast<double>(count - 1) - 1.0;
}

}  // namespace

EmbeddingDataset make_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const int k = spec.num_classes;
    const int a = spec.num_attributes();
    const auto m = static_cast<int>(spec.n_per_group.size());
    const auto d = spec.d_core + spec.d_spurious + spec.d_noise;
    const auto n = std::accumulate(spec.n_per_group.begin(), spec.n_per_group.end(), std::size_t{0});

    Rng rng(spec.seed);
    FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    std::vector<int> labels;
    std::vector<int> groups;
    labels.reserve(n);
    groups.reserve(n);
    Eigen::Index row = 0;
    for (int g = 0; g < m; ++g) {
        const int y = g / a;
        const int attr = g % a;
        const double core_mean = 0.5 * spec.core_gap * level_code(y, k);
        const double spur_mean = 0.5 * spec.spurious_gap * level_code(attr, a);
        for (std::size_t s = 0; s < spec.n_per_group[static_cast<std::size_t>(g)]; ++s, ++row) {
            Eigen::Index j = 0;
            for (std::size_t c = 0; c < spec.d_core; ++c, ++j)
                x(row, j) = core_mean + spec.noise_std * rng.normal();
            for (std::size_t c = 0; c < spec.d_spurious; ++c, ++j)
                x(row, j) = spur_mean + spec.noise_std * rng.normal();
            for (std::size_t c = 0; c < spec.d_noise; ++c, ++j)
                x(row, j) = spec.noise_std * rng.normal();
            labels.push_back(y);
            groups.push_back(g);
        }
    }
    return EmbeddingDataset(std::move(x), std::move(labels), std::move(groups), k, m);
}

SyntheticSuite make_synthetic_suite(const SyntheticSpec& spec, const SyntheticSuiteSizes& sizes) {
    spec.validate();
    if (!(sizes.train_scale > 0.0) || sizes.labeled_per_group < 2 || sizes.test_per_group < 1)
        throw ValidationError("invalid synthetic suite sizes");
    SyntheticSpec train = spec;
    for (auto& c : train.n_per_group)
        c = std::max<std::size_t>(1, round_count(static_cast<double>(c) * sizes.train_scale));
    SyntheticSpec labeled = spec;
    labeled.n_per_group.assign(spec.n_per_group.size(), sizes.labeled_per_group);
    labeled.seed = spec.seed + 1000003;
    SyntheticSpec test = spec;
    test.n_per_group.assign(spec.n_per_group.size(), sizes.test_per_group);
    test.seed = spec.seed + 2000003;

    auto halves = split_target_val(make_synthetic(labeled), spec.seed);
    return SyntheticSuite{make_synthetic(train), std::move(halves.first), std::move(halves.second),
                          make_synthetic(test)};
}

NoisyDataset inject_label_noise(const EmbeddingDataset& ds, const NoiseSpec& spec) {
    spec.validate();
    const int k = ds.num_classes();
    if (k < 2) throw ValidationError("label noise requires at least 2 classes");
    const auto n_flip = round_count(spec.flip_fraction * static_cast<double>(ds.size()));
    Rng rng(spec.seed);
    const auto perm = rng.permutation(ds.size());
    std::vector<std::size_t> flipped(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_flip));
    std::sort(flipped.begin(), flipped.end());
    auto labels = ds.labels();
    for (auto i : flipped) {
        const auto shift = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(k - 1)));
        labels[i] = (labels[i] + shift) % k;
    }
    return NoisyDataset{ds.with_labels(std::move(labels)), std::move(flipped)};
}

}  // namespace gsr
