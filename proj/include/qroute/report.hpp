#pragma once

#include <string>
#include <vector>

#include "qroute/scenario.hpp"
#include "qroute/studies.hpp"

namespace qroute::harness {

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Fixed, versioned CSV layouts for the study outputs.
std::string ablation_csv(const AblationResult& r);
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& x_name);
std::string adversary_csv(const std::vector<AdversaryImpact>& rows, double epsilon);
std::string scalability_csv(const std::vector<ScalabilityRow>& rows);
std::string drift_csv(const DriftStudy& study, int horizon);
std::string regret_trace_csv(const RegretTrace& trace);
std::string feasibility_csv(const std::vector<hybrid::AlphaStats>& stats,
                            const hybrid::FeasibilityReport& rep);
std::string belief_error_csv(const std::vector<BeliefErrorRow>& rows);
std::string feature_dim_csv(const std::vector<FeatureDimRow>& rows);
std::string bound_report_csv(const std::vector<planner::AggregationBoundRow>& rows);
std::string hybrid_bound_csv(const std::vector<hybrid::HybridBoundRow>& rows);

// Minimal dependency-free line chart: one polyline + circle markers per
// series; exactly one marker per data row.
struct ChartSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
};
std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<ChartSeries>& series);

void write_manifest(const std::string& dir, const ConfigFile& cfg, const std::string& command,
                    int seeds);

struct ReportOutcome {
    int csv_files = 0;
    int charts = 0;
};

// Aggregates every CSV in the run directory into SVG charts plus an index.
// Throws MISSING_RUNS when the directory holds no CSV output.
ReportOutcome emit_report(const std::string& run_dir);

}  // namespace qroute::harness
