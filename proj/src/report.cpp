#include "qroute/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "qroute/error.hpp"

namespace qroute::harness {

namespace fs = std::filesystem;

void write_text_file(const std::string& path, const std::string& content) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IO_ERROR, "cannot write " + path);
    f << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IO_ERROR, "cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

}  // namespace

std::string ablation_csv(const AblationResult& r) {
    std::ostringstream os;
    os << "variant,mean_fidelity,std_fidelity,mean_delivery,seeds\n";
    for (const auto& row : r.rows)
        os << row.variant << ',' << fmt(row.mean_fidelity) << ',' << fmt(row.std_fidelity) << ','
           << fmt(row.mean_delivery) << ',' << row.seeds << "\n";
    return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& x_name) {
    std::ostringstream os;
    os << "policy," << x_name << ",delivery_rate,avg_fidelity,decision_time_ms,mem_occupancy_pct\n";
    for (const auto& r : rows)
        os << r.policy << ',' << fmt(r.x) << ',' << fmt(r.delivery_rate) << ','
           << fmt(r.avg_fidelity) << ',' << fmt(r.decision_ms) << ',' << fmt(r.mem_pct) << "\n";
    return os.str();
}

std::string adversary_csv(const std::vector<AdversaryImpact>& rows, double epsilon) {
    std::ostringstream os;
    os << "policy,epsilon,clean_fidelity,attacked_fidelity,relative_drop,clean_delivery,"
          "attacked_delivery\n";
    for (const auto& r : rows)
        os << r.policy << ',' << fmt(epsilon) << ',' << fmt(r.clean_fidelity) << ','
           << fmt(r.attacked_fidelity) << ',' << fmt(r.relative_drop) << ','
           << fmt(r.clean_delivery) << ',' << fmt(r.attacked_delivery) << "\n";
    return os.str();
}

std::string scalability_csv(const std::vector<ScalabilityRow>& rows) {
    std::ostringstream os;
    os << "n_nodes,measured_ms,c_gnn_ms,c_pomdp_ms,alpha_bar,planner_call_fraction,predicted_ms,"
          "relative_error,within_15pct\n";
    for (const auto& r : rows)
        os << r.n_nodes << ',' << fmt(r.mean_decision_ms) << ',' << fmt(r.c_gnn_ms) << ','
           << fmt(r.c_pomdp_ms) << ',' << fmt(r.alpha_bar) << ',' << fmt(r.planner_call_fraction)
           << ',' << fmt(r.predicted_ms) << ',' << fmt(r.relative_error) << ','
           << (r.within_tolerance ? 1 : 0) << "\n";
    return os.str();
}

std::string drift_csv(const DriftStudy& study, int horizon) {
    std::ostringstream os;
    os << "delta,delta_T,regret_total,l_f_hat,max_value_step,stability_bound,stability_ok\n";
    for (const auto& t : study.traces)
        os << fmt(t.delta) << ',' << fmt(t.delta * horizon) << ',' << fmt(t.total) << ','
           << fmt(t.l_f_hat) << ',' << fmt(t.max_value_step) << ',' << fmt(t.stability_bound)
           << ',' << (t.stability_ok ? 1 : 0) << "\n";
    return os.str();
}

std::string regret_trace_csv(const RegretTrace& trace) {
    std::ostringstream os;
    os << "t,instantaneous,cumulative\n";
    for (std::size_t t = 0; t < trace.instantaneous.size(); ++t)
        os << t << ',' << fmt(trace.instantaneous[t]) << ',' << fmt(trace.cumulative[t]) << "\n";
    return os.str();
}

std::string feasibility_csv(const std::vector<hybrid::AlphaStats>& stats,
                            const hybrid::FeasibilityReport& rep) {
    std::ostringstream os;
    os << "alpha,mean_mu,sd_mu,deadline_ok_rate,memory_ok,deadline_ok,mixture_gap,mixture_tol,"
          "mixture_ok\n";
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const auto& s = stats[i];
        const auto& r = rep.rows[i];
        os << fmt(s.alpha) << ',' << fmt(s.mean_total_mu) << ',' << fmt(s.sd_total_mu) << ','
           << fmt(s.deadline_ok_rate) << ',' << (r.memory_ok ? 1 : 0) << ','
           << (r.deadline_ok ? 1 : 0) << ',' << fmt(r.mixture_gap) << ',' << fmt(r.mixture_tol)
           << ',' << (r.mixture_ok ? 1 : 0) << "\n";
    }
    return os.str();
}

std::string belief_error_csv(const std::vector<BeliefErrorRow>& rows) {
    std::ostringstream os;
    os << "n_nodes,gamma_scale,mean_belief_error\n";
    for (const auto& r : rows)
        os << r.n_nodes << ',' << fmt(r.gamma_scale) << ',' << fmt(r.mean_belief_error) << "\n";
    return os.str();
}

std::string feature_dim_csv(const std::vector<FeatureDimRow>& rows) {
    std::ostringstream os;
    os << "feature_dim,memory_capacity,mean_fidelity\n";
    for (const auto& r : rows)
        os << r.feature_dim << ',' << r.memory_capacity << ',' << fmt(r.mean_fidelity) << "\n";
    return os.str();
}

std::string bound_report_csv(const std::vector<planner::AggregationBoundRow>& rows) {
    std::ostringstream os;
    os << "eps,L_V,error,bound,margin\n";
    for (const auto& r : rows)
        os << fmt(r.eps) << ',' << fmt(r.l_v) << ',' << fmt(r.error) << ',' << fmt(r.bound) << ','
           << fmt(r.margin) << "\n";
    return os.str();
}

std::string hybrid_bound_csv(const std::vector<hybrid::HybridBoundRow>& rows) {
    std::ostringstream os;
    os << "kl,penalty,min_slack,direct_gap,pass\n";
    for (const auto& r : rows)
        os << fmt(r.kl_level) << ',' << fmt(r.penalty) << ',' << fmt(r.min_slack) << ','
           << fmt(r.direct_gap) << ',' << (r.pass ? 1 : 0) << "\n";
    return os.str();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<ChartSeries>& series) {
    const int width = 640, height = 420, margin = 60;
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    if (x_lo > x_hi) x_lo = 0, x_hi = 1;
    if (y_lo > y_hi) y_lo = 0, y_hi = 1;
    if (x_hi == x_lo) x_hi = x_lo + 1;
    if (y_hi == y_lo) y_hi = y_lo + 1;
    auto px = [&](double x) {
        return margin + (x - x_lo) / (x_hi - x_lo) * (width - 2 * margin);
    };
    auto py = [&](double y) {
        return height - margin - (y - y_lo) / (y_hi - y_lo) * (height - 2 * margin);
    };
    const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
       << title << "</text>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin
       << "\" y2=\"" << height - margin << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << height - margin << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << width / 2 << "\" y=\"" << height - 16
       << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    os << "<text x=\"18\" y=\"" << height / 2 << "\" font-size=\"12\" transform=\"rotate(-90 18 "
       << height / 2 << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
    // axis extents
    os << "<text x=\"" << margin << "\" y=\"" << height - margin + 16 << "\" font-size=\"10\">"
       << fmt(x_lo) << "</text>\n";
    os << "<text x=\"" << width - margin << "\" y=\"" << height - margin + 16
       << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(x_hi) << "</text>\n";
    os << "<text x=\"" << margin - 4 << "\" y=\"" << height - margin
       << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(y_lo) << "</text>\n";
    os << "<text x=\"" << margin - 4 << "\" y=\"" << margin + 4
       << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(y_hi) << "</text>\n";

    int color = 0;
    for (const auto& s : series) {
        const char* c = palette[color % 6];
        std::ostringstream poly;
        for (const auto& [x, y] : s.points) poly << px(x) << ',' << py(y) << ' ';
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\""
           << poly.str() << "\"/>\n";
        for (const auto& [x, y] : s.points)
            os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << c
               << "\"/>\n";
        os << "<text x=\"" << width - margin + 4 << "\" y=\"" << margin + 14 * color
           << "\" font-size=\"10\" fill=\"" << c << "\">" << s.name << "</text>\n";
        ++color;
    }
    os << "</svg>\n";
    return os.str();
}

void write_manifest(const std::string& dir, const ConfigFile& cfg, const std::string& command,
                    int seeds) {
    nlohmann::json j;
    j["tool"] = "qroute";
    j["version"] = "0.1.0";
    j["command"] = command;
    j["seeds"] = seeds;
    j["config_hash"] = cfg.hash();
    j["config"] = cfg.canonical();
    write_text_file(dir + "/manifest.json", j.dump(2) + "\n");
}

namespace {

struct ParsedCsv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

ParsedCsv parse_csv(const std::string& text) {
    ParsedCsv csv;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (first) {
            csv.header = cells;
            first = false;
        } else {
            csv.rows.push_back(cells);
        }
    }
    return csv;
}

bool numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

}  // namespace

ReportOutcome emit_report(const std::string& run_dir) {
    ReportOutcome out;
    if (!fs::exists(run_dir)) throw Error(ErrorCode::MISSING_RUNS, "run directory missing");
    std::vector<fs::path> csvs;
    for (const auto& entry : fs::directory_iterator(run_dir))
        if (entry.path().extension() == ".csv") csvs.push_back(entry.path());
    std::sort(csvs.begin(), csvs.end());
    if (csvs.empty()) throw Error(ErrorCode::MISSING_RUNS, "no CSV output in " + run_dir);

    std::ostringstream index;
    index << "# Report index\n\n";
    for (const auto& path : csvs) {
        ++out.csv_files;
        const auto csv = parse_csv(read_text_file(path.string()));
        if (csv.rows.empty() || csv.header.size() < 2) continue;
        // choose the first two numeric columns as (x, y)
        int xcol = -1, ycol = -1;
        for (std::size_t c = 0; c < csv.header.size(); ++c) {
            if (!numeric(csv.rows[0][c])) continue;
            if (xcol < 0) {
                xcol = static_cast<int>(c);
            } else {
                ycol = static_cast<int>(c);
                break;
            }
        }
        if (xcol < 0 || ycol < 0) continue;
        ChartSeries series;
        series.name = csv.header[ycol];
        for (const auto& row : csv.rows)
            if (numeric(row[xcol]) && numeric(row[ycol]))
                series.points.emplace_back(std::stod(row[xcol]), std::stod(row[ycol]));
        const auto svg = line_chart_svg(path.stem().string(), csv.header[xcol], csv.header[ycol],
                                        {series});
        const auto svg_path = (fs::path(run_dir) / (path.stem().string() + ".svg")).string();
        write_text_file(svg_path, svg);
        ++out.charts;
        index << "- " << path.filename().string() << " -> " << path.stem().string() << ".svg ("
              << csv.rows.size() << " rows)\n";
    }
    write_text_file(run_dir + "/report_index.md", index.str());
    return out;
}

}  // namespace qroute::harness
