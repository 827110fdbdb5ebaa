#include "gsr/run_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "gsr/error.hpp"

namespace gsr {

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

}  // namespace

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

nlohmann::json to_json(const StepRecord& row) {
    nlohmann::json j;
    j["step"] = row.step;
    j["gamma"] = to_vector(row.gamma);
    j["target_group_risks"] = to_vector(row.target_group_risks);
    j["val_wg_risk"] = row.val_wg_risk;
    j["val_wg_acc"] = row.val_wg_acc;
    j["group_weight_sums"] = row.group_weight_sums;
    j["selected"] = row.selected;
    j["lr"] = row.lr;
    j["xi_norm"] = row.xi_norm;
    j["clipped"] = row.clipped;
    j["rejected"] = row.rejected;
    j["group_weight_quantiles"] = row.group_weight_quantiles;
    return j;
}

nlohmann::json summary_json(const RunRecord& record) {
    nlohmann::json s;
    s["method"] = std::string(to_string(record.method));
    s["steps"] = record.steps.size();
    s["selected_step"] = record.selected_step;
    s["selected_score"] = record.selected_score;
    return nlohmann::json{{"summary", s}};
}

void write_run_record(const RunRecord& record, const std::filesystem::path& path,
                      const nlohmann::json& extra) {
    auto out = open_out(path);
    for (const auto& row : record.steps) out << to_json(row).dump() << '\n';
    auto summary = summary_json(record);
    if (extra.is_object()) summary["summary"].update(extra);
    out << summary.dump() << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

ParsedRun read_run_record(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open run record " + path.string());
    ParsedRun run;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw ValidationError("corrupt run record at line " + std::to_string(lineno));
        if (j.contains("summary")) {
            run.summary = j["summary"];
        } else {
            if (!j.contains("step") || !j.contains("gamma") || !j.contains("group_weight_sums"))
                throw ValidationError("run record line " + std::to_string(lineno) +
                                      " lacks required step fields");
            run.steps.push_back(std::move(j));
        }
    }
    if (run.steps.empty()) throw ValidationError("run record has no steps: " + path.string());
    return run;
}

void write_weights(const std::filesystem::path& path, const Eigen::VectorXd& weights,
                   const std::optional<std::vector<int>>& groups,
                   const std::optional<std::vector<std::size_t>>& flipped) {
    auto out = open_out(path);
    std::vector<bool> is_flipped(static_cast<std::size_t>(weights.size()), false);
    if (flipped)
        for (auto i : *flipped) is_flipped.at(i) = true;
    out << "index,group,weight" << (flipped ? ",flipped" : "") << '\n';
    for (Eigen::Index i = 0; i < weights.size(); ++i) {
        const auto u = static_cast<std::size_t>(i);
        out << i << ',' << (groups ? (*groups)[u] : -1) << ',' << format_double(weights(i));
        if (flipped) out << ',' << (is_flipped[u] ? 1 : 0);
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<WeightRow> read_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open weights file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("empty weights file " + path.string());
    const bool has_flipped = split_csv(line).size() == 4;
    std::vector<WeightRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != (has_flipped ? 4u : 3u))
            throw ValidationError("malformed weights row " + std::to_string(rows.size()));
        WeightRow r;
        try {
            r.index = std::stoul(f[0]);
            r.group = std::stoi(f[1]);
            r.weight = std::stod(f[2]);
            if (has_flipped) r.flipped = std::stoi(f[3]) != 0;
        } catch (const std::exception&) {
            throw ValidationError("malformed weights row " + std::to_string(rows.size()));
        }
        rows.push_back(r);
    }
    return rows;
}

void write_params(const std::filesystem::path& path, const ClassifierParams& params) {
    auto out = open_out(path);
    for (Eigen::Index j = 0; j < params.psi.rows(); ++j) {
        for (Eigen::Index k = 0; k < params.psi.cols(); ++k)
            out << (k ? "," : "") << format_double(params.psi(j, k));
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

ClassifierParams read_params(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open parameter file " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> r;
        try {
            for (const auto& f : split_csv(line)) r.push_back(std::stod(f));
        } catch (const std::exception&) {
            throw ValidationError("malformed parameter row " + std::to_string(rows.size()) + " in " +
                                  path.string());
        }
        if (!rows.empty() && r.size() != rows.front().size())
            throw ValidationError("ragged parameter file " + path.string());
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ValidationError("empty parameter file " + path.string());
    Eigen::MatrixXd psi(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t j = 0; j < rows.size(); ++j)
        for (std::size_t k = 0; k < rows[j].size(); ++k)
            psi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = rows[j][k];
    return ClassifierParams{std::move(psi)};
}

void write_influence_table(const std::filesystem::path& path, const InfluenceTable& table) {
    auto out = open_out(path);
    out << "index";
    for (Eigen::Index g = 0; g < table.scores.cols(); ++g) out << ",g" << g;
    out << '\n';
    for (Eigen::Index i = 0; i < table.scores.rows(); ++i) {
        out << i;
        for (Eigen::Index g = 0; g < table.scores.cols(); ++g)
            out << ',' << format_double(table.scores(i, g));
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

nlohmann::json to_json(const GradCheckReport& report) {
    nlohmann::json j;
    j["rows"] = report.rows;
    j["cols"] = report.cols;
    j["analytic"] = report.analytic;
    j["numeric"] = report.numeric;
    j["abs_error"] = report.abs_error;
    j["rel_error"] = report.rel_error;
    j["max_abs_error"] = report.max_abs_error;
    j["max_rel_error"] = report.max_rel_error;
    j["tolerance"] = report.tolerance;
    j["floor_fraction"] = report.floor_fraction;
    j["pass"] = report.pass;
    nlohmann::json off = nlohmann::json::array();
    for (auto [r, c] : report.offending()) off.push_back({r, c});
    j["offending"] = off;
    return j;
}

}  // namespace gsr
