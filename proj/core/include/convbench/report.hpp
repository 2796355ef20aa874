#pragma once

#include <string>
#include <vector>

#include "convbench/harness.hpp"

namespace convbench {

/// Schema: model,strategy,mode,step,max_err_T,max_err_ux,max_err_uy,
/// res_mass,res_mom,res_heat. One row per record, cells in input order.
void write_metrics_csv(const std::vector<ExperimentCell>& cells, const std::string& path);

/// Schema: model,strategy,mode,max_err_T,max_err_ux,max_err_uy with the
/// max-over-rollout values (the Tables 2-3 shape: one row per cell).
void write_summary_csv(const std::vector<ExperimentCell>& cells, const std::string& path);

std::vector<ExperimentCell> read_metrics_csv(const std::string& path);

/// Minimal deterministic SVG plotting; no rasterization dependencies.
struct PlotSeries {
    std::string label;
    std::vector<double> y; // x = 1..n
};

void svg_line_chart(const std::vector<PlotSeries>& series, const std::string& title,
                    const std::string& y_label, const std::vector<double>& hlines,
                    const std::string& path);

struct BarGroup {
    std::string label;           // x-axis group (e.g. model name)
    std::vector<double> values;  // one bar per series
};

void svg_bar_chart(const std::vector<std::string>& series_labels,
                   const std::vector<BarGroup>& groups, const std::string& title,
                   const std::string& y_label, const std::string& path);

/// Writes metrics.csv, summary.csv and the chart set (per-strategy error
/// bars, per-variable error curves with threshold lines, residual series of
/// the best model) into out_dir.
void emit_report(const std::vector<ExperimentCell>& cells, const ThresholdConfig& tau,
                 const std::string& out_dir);

} // namespace convbench
