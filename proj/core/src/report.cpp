#include "convbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace convbench {
namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) {
        throw IoError("cannot open " + path + " for writing");
    }
    return os;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

} // namespace

void write_metrics_csv(const std::vector<ExperimentCell>& cells, const std::string& path) {
    std::ofstream os = open_out(path);
    os << "model,strategy,mode,step,max_err_T,max_err_ux,max_err_uy,res_mass,res_mom,res_heat\n";
    for (const ExperimentCell& c : cells) {
        for (const MetricsRecord& r : c.records) {
            os << c.model << ',' << c.strategy << ',' << c.mode << ',' << r.step << ','
               << fmt(r.max_err_T) << ',' << fmt(r.max_err_ux) << ',' << fmt(r.max_err_uy)
               << ',' << fmt(r.res_mass) << ',' << fmt(r.res_mom) << ',' << fmt(r.res_heat)
               << '\n';
        }
    }
    if (!os) {
        throw IoError("failed writing " + path);
    }
}

void write_summary_csv(const std::vector<ExperimentCell>& cells, const std::string& path) {
    std::ofstream os = open_out(path);
    os << "model,strategy,mode,max_err_T,max_err_ux,max_err_uy\n";
    for (const ExperimentCell& c : cells) {
        os << c.model << ',' << c.strategy << ',' << c.mode << ','
           << fmt(c.max_over_rollout.T) << ',' << fmt(c.max_over_rollout.ux) << ','
           << fmt(c.max_over_rollout.uy) << '\n';
    }
    if (!os) {
        throw IoError("failed writing " + path);
    }
}

std::vector<ExperimentCell> read_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) {
        throw IoError("cannot open " + path);
    }
    std::string line;
    if (!std::getline(is, line)) {
        throw IoError("empty metrics file " + path);
    }
    std::vector<ExperimentCell> cells;
    while (std::getline(is, line)) {
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) {
            fields.push_back(field);
        }
        if (fields.size() != 10) {
            throw IoError("malformed metrics row: " + line);
        }
        if (cells.empty() || cells.back().model != fields[0] ||
            cells.back().strategy != fields[1] || cells.back().mode != fields[2]) {
            ExperimentCell c;
            c.model = fields[0];
            c.strategy = fields[1];
            c.mode = fields[2];
            cells.push_back(std::move(c));
        }
        MetricsRecord r;
        r.step = std::stoi(fields[3]);
        r.max_err_T = std::stod(fields[4]);
        r.max_err_ux = std::stod(fields[5]);
        r.max_err_uy = std::stod(fields[6]);
        r.res_mass = std::stod(fields[7]);
        r.res_mom = std::stod(fields[8]);
        r.res_heat = std::stod(fields[9]);
        ExperimentCell& c = cells.back();
        c.max_over_rollout.T = std::max(c.max_over_rollout.T, r.max_err_T);
        c.max_over_rollout.ux = std::max(c.max_over_rollout.ux, r.max_err_ux);
        c.max_over_rollout.uy = std::max(c.max_over_rollout.uy, r.max_err_uy);
        c.records.push_back(r);
    }
    return cells;
}

void svg_line_chart(const std::vector<PlotSeries>& series, const std::string& title,
                    const std::string& y_label, const std::vector<double>& hlines,
                    const std::string& path) {
    const double width = 720, height = 420;
    const double lm = 70, rm = 160, tm = 40, bm = 45;
    const double pw = width - lm - rm, ph = height - tm - bm;

    double ymin = 0.0, ymax = 1e-300;
    std::size_t nmax = 1;
    for (const PlotSeries& s : series) {
        for (double v : s.y) {
            ymax = std::max(ymax, v);
        }
        nmax = std::max(nmax, s.y.size());
    }
    for (double h : hlines) {
        ymax = std::max(ymax, h);
    }
    ymax *= 1.05;
    if (!(ymax > ymin)) {
        ymax = ymin + 1.0;
    }

    auto px = [&](double i) { return lm + pw * (nmax <= 1 ? 0.0 : (i - 1) / double(nmax - 1)); };
    auto py = [&](double v) { return tm + ph * (1.0 - (v - ymin) / (ymax - ymin)); };

    std::ofstream os = open_out(path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << lm << "\" y=\"20\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << lm << "\" y1=\"" << tm << "\" x2=\"" << lm << "\" y2=\""
       << tm + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << lm << "\" y1=\"" << tm + ph << "\" x2=\"" << lm + pw << "\" y2=\""
       << tm + ph << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = ymin + (ymax - ymin) * t / 4.0;
        os << "<text x=\"" << lm - 6 << "\" y=\"" << py(v) + 4
           << "\" text-anchor=\"end\">" << fmt_coord(v) << "</text>\n";
        os << "<line x1=\"" << lm << "\" y1=\"" << py(v) << "\" x2=\"" << lm + pw
           << "\" y2=\"" << py(v) << "\" stroke=\"#dddddd\"/>\n";
    }
    os << "<text x=\"" << lm + pw / 2 << "\" y=\"" << height - 10
       << "\" text-anchor=\"middle\">step</text>\n";
    os << "<text x=\"18\" y=\"" << tm + ph / 2
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << tm + ph / 2 << ")\">"
       << y_label << "</text>\n";
    for (double h : hlines) {
        os << "<line x1=\"" << lm << "\" y1=\"" << py(h) << "\" x2=\"" << lm + pw
           << "\" y2=\"" << py(h)
           << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
        os << "<text x=\"" << lm + pw - 4 << "\" y=\"" << py(h) - 4
           << "\" text-anchor=\"end\">threshold " << fmt_coord(h) << "</text>\n";
    }
    for (std::size_t si = 0; si < series.size(); ++si) {
        const PlotSeries& s = series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.y.size(); ++i) {
            os << fmt_coord(px(double(i + 1))) << ',' << fmt_coord(py(s.y[i])) << ' ';
        }
        os << "\"/>\n";
        const double ly = tm + 16.0 * double(si);
        os << "<line x1=\"" << lm + pw + 8 << "\" y1=\"" << ly << "\" x2=\"" << lm + pw + 28
           << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << lm + pw + 32 << "\" y=\"" << ly + 4 << "\">" << s.label
           << "</text>\n";
    }
    os << "</svg>\n";
    if (!os) {
        throw IoError("failed writing " + path);
    }
}

void svg_bar_chart(const std::vector<std::string>& series_labels,
                   const std::vector<BarGroup>& groups, const std::string& title,
                   const std::string& y_label, const std::string& path) {
    const double width = 720, height = 420;
    const double lm = 70, rm = 150, tm = 40, bm = 60;
    const double pw = width - lm - rm, ph = height - tm - bm;
    double ymax = 1e-300;
    for (const BarGroup& g : groups) {
        for (double v : g.values) {
            ymax = std::max(ymax, v);
        }
    }
    ymax *= 1.1;
    auto py = [&](double v) { return tm + ph * (1.0 - v / ymax); };

    std::ofstream os = open_out(path);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << lm << "\" y=\"20\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << lm << "\" y1=\"" << tm << "\" x2=\"" << lm << "\" y2=\""
       << tm + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << lm << "\" y1=\"" << tm + ph << "\" x2=\"" << lm + pw << "\" y2=\""
       << tm + ph << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double v = ymax * t / 4.0;
        os << "<text x=\"" << lm - 6 << "\" y=\"" << py(v) + 4
           << "\" text-anchor=\"end\">" << fmt_coord(v) << "</text>\n";
    }
    os << "<text x=\"18\" y=\"" << tm + ph / 2
       << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << tm + ph / 2 << ")\">"
       << y_label << "</text>\n";
    const double gw = pw / std::max<std::size_t>(groups.size(), 1);
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const BarGroup& g = groups[gi];
        const double bw = gw * 0.8 / std::max<std::size_t>(g.values.size(), 1);
        for (std::size_t vi = 0; vi < g.values.size(); ++vi) {
            const double x = lm + gw * double(gi) + gw * 0.1 + bw * double(vi);
            const char* color = kPalette[vi % (sizeof(kPalette) / sizeof(kPalette[0]))];
            os << "<rect x=\"" << fmt_coord(x) << "\" y=\"" << fmt_coord(py(g.values[vi]))
               << "\" width=\"" << fmt_coord(bw * 0.9) << "\" height=\""
               << fmt_coord(tm + ph - py(g.values[vi])) << "\" fill=\"" << color << "\"/>\n";
        }
        os << "<text x=\"" << lm + gw * (double(gi) + 0.5) << "\" y=\"" << tm + ph + 16
           << "\" text-anchor=\"middle\">" << g.label << "</text>\n";
    }
    for (std::size_t vi = 0; vi < series_labels.size(); ++vi) {
        const char* color = kPalette[vi % (sizeof(kPalette) / sizeof(kPalette[0]))];
        const double ly = tm + 16.0 * double(vi);
        os << "<rect x=\"" << lm + pw + 8 << "\" y=\"" << ly - 8
           << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"" << lm + pw + 26 << "\" y=\"" << ly + 2 << "\">"
           << series_labels[vi] << "</text>\n";
    }
    os << "</svg>\n";
    if (!os) {
        throw IoError("failed writing " + path);
    }
}

void emit_report(const std::vector<ExperimentCell>& cells, const ThresholdConfig& tau,
                 const std::string& out_dir) {
    tau.validate();
    write_metrics_csv(cells, out_dir + "/metrics.csv");
    write_summary_csv(cells, out_dir + "/summary.csv");

    // per-strategy bars of regressive max errors (Tables/Figs 5-6 analogue)
    for (const char* strategy : {"absolute", "difference"}) {
        std::vector<BarGroup> groups;
        for (const ExperimentCell& c : cells) {
            if (c.strategy == strategy && c.mode == "regressive") {
                groups.push_back({c.model,
                                  {c.max_over_rollout.T, c.max_over_rollout.ux,
                                   c.max_over_rollout.uy}});
            }
        }
        if (!groups.empty()) {
            svg_bar_chart({"max_err_T [K]", "max_err_ux [m/s]", "max_err_uy [m/s]"}, groups,
                          std::string("max rollout error, ") + strategy + " strategy",
                          "max error", out_dir + "/errors_" + strategy + ".svg");
        }
    }

    // per-variable regressive error curves with threshold lines (Fig 7 analogue)
    struct VarSel {
        const char* name;
        double MetricsRecord::* field;
        double tau;
    };
    const VarSel vars[] = {{"T", &MetricsRecord::max_err_T, tau.tau_T},
                           {"ux", &MetricsRecord::max_err_ux, tau.tau_ux},
                           {"uy", &MetricsRecord::max_err_uy, tau.tau_uy}};
    for (const VarSel& v : vars) {
        std::vector<PlotSeries> series;
        for (const ExperimentCell& c : cells) {
            if (c.mode != "regressive") {
                continue;
            }
            PlotSeries s;
            s.label = c.model + "/" + c.strategy;
            for (const MetricsRecord& r : c.records) {
                s.y.push_back(r.*(v.field));
            }
            series.push_back(std::move(s));
        }
        if (!series.empty()) {
            svg_line_chart(series, std::string("regressive max error, ") + v.name,
                           std::string("max_err_") + v.name, {v.tau},
                           out_dir + "/error_series_" + v.name + ".svg");
        }
    }

    // residual stability of the best model (Fig 8 analogue)
    std::string best = "convlstm_unet";
    bool found = false;
    for (const ExperimentCell& c : cells) {
        if (c.model == best && c.mode == "regressive") {
            found = true;
        }
    }
    if (!found && !cells.empty()) {
        best = cells.front().model;
    }
    std::vector<PlotSeries> res_series;
    for (const ExperimentCell& c : cells) {
        if (c.model != best || c.mode != "regressive") {
            continue;
        }
        struct ResSel {
            const char* name;
            double MetricsRecord::* field;
        };
        for (const ResSel& rs : {ResSel{"mass", &MetricsRecord::res_mass},
                                 ResSel{"momentum", &MetricsRecord::res_mom},
                                 ResSel{"heat", &MetricsRecord::res_heat}}) {
            PlotSeries s;
            s.label = c.strategy + "/" + rs.name;
            for (std::size_t i = 1; i < c.records.size(); ++i) { // record 1 has no pair yet
                s.y.push_back(c.records[i].*(rs.field));
            }
            res_series.push_back(std::move(s));
        }
    }
    if (!res_series.empty()) {
        svg_line_chart(res_series, "residual norms, " + best + " (regressive)",
                       "residual max-norm", {}, out_dir + "/residual_series.svg");
    }
}

} // namespace convbench
