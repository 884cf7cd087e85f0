#include "jenn/diagnostics.hpp"

#include "jenn/container.hpp"
#include "jenn/error.hpp"
#include "jenn/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace jenn {

namespace {

void check_state(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg, const StateVector& x,
                 const char* what) {
    if (nn.dim() != cfg.n || jenn.dim() != cfg.n || x.size() != cfg.n) {
        throw ShapeError(fmt::format("{}: expected dimension {}, got nn={} jenn={} x={}", what, cfg.n, nn.dim(),
                                     jenn.dim(), x.size()));
    }
}

void check_vector(const Lorenz96Config& cfg, const StateVector& v, const char* what) {
    if (v.size() != cfg.n) {
        throw ShapeError(fmt::format("{}: perturbation has size {}, expected {}", what, v.size(), cfg.n));
    }
}

} // namespace

ComparisonProfile make_profile(const Vector& y_true, const Vector& y_nn, const Vector& y_jenn) {
    if (y_nn.size() != y_true.size() || y_jenn.size() != y_true.size()) {
        throw ShapeError("make_profile: output sizes differ");
    }
    ComparisonProfile p;
    p.site.resize(static_cast<std::size_t>(y_true.size()));
    std::iota(p.site.begin(), p.site.end(), 0);
    p.y_true = y_true;
    p.y_nn = y_nn;
    p.y_jenn = y_jenn;
    p.abs_diff_nn = (y_nn - y_true).cwiseAbs();
    p.abs_diff_jenn = (y_jenn - y_true).cwiseAbs();
    return p;
}

ComparisonProfile compare_forecast(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                                   const StateVector& x) {
    check_state(nn, jenn, cfg, x, "compare_forecast");
    return make_profile(lorenz96::step_rk4(cfg, x), nn.predict(x), jenn.predict(x));
}

ComparisonProfile compare_tlm(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                              const StateVector& x, const StateVector& dx) {
    check_state(nn, jenn, cfg, x, "compare_tlm");
    check_vector(cfg, dx, "compare_tlm");
    return make_profile(lorenz96::step_tlm(cfg, x, dx), nn.tangent(x, dx), jenn.tangent(x, dx));
}

ComparisonProfile compare_adj(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                              const StateVector& x, const StateVector& yhat) {
    check_state(nn, jenn, cfg, x, "compare_adj");
    check_vector(cfg, yhat, "compare_adj");
    return make_profile(lorenz96::step_adj(cfg, x, yhat), nn.adjoint(x, yhat), jenn.adjoint(x, yhat));
}

JacobianComparison compare_jacobian(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                                    const StateVector& x) {
    check_state(nn, jenn, cfg, x, "compare_jacobian");
    JacobianComparison c;
    c.j_true = lorenz96::reference_jacobian(cfg, x);
    c.j_nn = nn.jacobian(x);
    c.j_jenn = jenn.jacobian(x);
    c.dev_nn = c.j_nn - c.j_true;
    c.dev_jenn = c.j_jenn - c.j_true;
    c.frob_rmse_nn = c.dev_nn.norm() / static_cast<double>(cfg.n);
    c.frob_rmse_jenn = c.dev_jenn.norm() / static_cast<double>(cfg.n);
    return c;
}

ProbeStatistics aggregate_probes(const Emulator& nn, const Emulator& jenn, const SensitivitySet& sens,
                                 Eigen::Index probes, Eigen::Index jacobian_states) {
    if (sens.size() == 0 || probes <= 0 || jacobian_states <= 0) {
        throw ConfigError("aggregate_probes: need at least one probe and one Jacobian state");
    }
    const Eigen::Index count = std::min(probes, sens.size());
    const Eigen::Index jcount = std::min(jacobian_states, count);
    const auto& cfg = sens.config;

    struct Row {
        double f_nn, f_jenn, t_nn, t_jenn, a_nn, a_jenn, j_nn, j_jenn;
    };
    std::vector<Row> rows(static_cast<std::size_t>(count));
    parallel_for(rows.size(), [&](std::size_t i) {
        const auto k = static_cast<Eigen::Index>(i);
        const StateVector x = sens.x.col(k);
        const auto f = compare_forecast(nn, jenn, cfg, x);
        const auto t = compare_tlm(nn, jenn, cfg, x, sens.dx.col(k));
        const auto a = compare_adj(nn, jenn, cfg, x, sens.yhat.col(k));
        Row& r = rows[i];
        r = {f.abs_diff_nn.mean(), f.abs_diff_jenn.mean(), t.abs_diff_nn.mean(), t.abs_diff_jenn.mean(),
             a.abs_diff_nn.mean(), a.abs_diff_jenn.mean(), 0.0, 0.0};
        if (k < jcount) {
            const auto j = compare_jacobian(nn, jenn, cfg, x);
            r.j_nn = j.frob_rmse_nn;
            r.j_jenn = j.frob_rmse_jenn;
        }
    });

    ProbeStatistics s;
    s.probes = count;
    s.jacobian_states = jcount;
    for (const Row& r : rows) {
        s.forecast_nn += r.f_nn;
        s.forecast_jenn += r.f_jenn;
        s.tlm_nn += r.t_nn;
        s.tlm_jenn += r.t_jenn;
        s.adj_nn += r.a_nn;
        s.adj_jenn += r.a_jenn;
        s.frob_rmse_nn += r.j_nn;
        s.frob_rmse_jenn += r.j_jenn;
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (double* v : {&s.forecast_nn, &s.forecast_jenn, &s.tlm_nn, &s.tlm_jenn, &s.adj_nn, &s.adj_jenn}) {
        *v *= inv;
    }
    s.frob_rmse_nn /= static_cast<double>(jcount);
    s.frob_rmse_jenn /= static_cast<double>(jcount);
    return s;
}

FigureData collect_figure_data(const Emulator& nn, const Emulator& jenn, const SensitivitySet& sens,
                               Eigen::Index record, Seed seed) {
    if (record < 0 || record >= sens.size()) {
        throw ConfigError(fmt::format("collect_figure_data: record {} outside [0, {})", record, sens.size()));
    }
    const auto& cfg = sens.config;
    const StateVector x = sens.x.col(record);
    FigureData d;
    d.seed = seed;
    d.record = record;
    d.forecast = compare_forecast(nn, jenn, cfg, x);
    d.tlm = compare_tlm(nn, jenn, cfg, x, sens.dx.col(record));
    d.adj = compare_adj(nn, jenn, cfg, x, sens.yhat.col(record));
    d.jacobian = compare_jacobian(nn, jenn, cfg, x);
    return d;
}

// ---------------------------------------------------------------------------
// CSV

std::string profile_csv(const ComparisonProfile& p) {
    std::string out = kProfileCsvHeader;
    out += '\n';
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        out += fmt::format("{},{},{},{},{},{}\n", p.site[static_cast<std::size_t>(i)],
                           p.y_true[i], p.y_nn[i], p.y_jenn[i], p.abs_diff_nn[i], p.abs_diff_jenn[i]);
    }
    return out;
}

std::string jacobian_csv(const JacobianComparison& c) {
    std::string out = kJacobianCsvHeader;
    out += '\n';
    for (Eigen::Index r = 0; r < c.j_true.rows(); ++r) {
        for (Eigen::Index k = 0; k < c.j_true.cols(); ++k) {
            out += fmt::format("{},{},{},{},{},{},{}\n", r, k, c.j_true(r, k),
                               c.j_nn(r, k), c.j_jenn(r, k), c.dev_nn(r, k), c.dev_jenn(r, k));
        }
    }
    return out;
}

std::string summary_csv(const FigureData& d) {
    std::string out = kSummaryCsvHeader;
    out += '\n';
    auto line = [&](std::string_view fig, std::string_view stat, const std::string& value) {
        out += fmt::format("{},{},{}\n", fig, stat, value);
    };
    line("all", "seed", std::to_string(d.seed));
    line("all", "record", std::to_string(d.record));
    const std::pair<const char*, const ComparisonProfile*> profiles[] = {
        {"fig2_forecast", &d.forecast}, {"fig3_tlm", &d.tlm}, {"fig4_adj", &d.adj}};
    for (const auto& [name, p] : profiles) {
        line(name, "mean_abs_diff_nn", format_real(p->abs_diff_nn.mean()));
        line(name, "mean_abs_diff_jenn", format_real(p->abs_diff_jenn.mean()));
        line(name, "max_abs_diff_nn", format_real(p->abs_diff_nn.maxCoeff()));
        line(name, "max_abs_diff_jenn", format_real(p->abs_diff_jenn.maxCoeff()));
    }
    line("fig5_jacobian", "frob_rmse_nn", format_real(d.jacobian.frob_rmse_nn));
    line("fig5_jacobian", "frob_rmse_jenn", format_real(d.jacobian.frob_rmse_jenn));
    return out;
}

// ---------------------------------------------------------------------------
// SVG

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Series {
    const Vector* values;
    const char* label;
    const char* color;
};

// One line-plot panel with its own y range.
void line_panel(std::string& out, double x0, double y0, double w, double h, const std::string& heading,
                const std::vector<Series>& series) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : series) {
        lo = std::min(lo, s.values->minCoeff());
        hi = std::max(hi, s.values->maxCoeff());
    }
    if (!(hi > lo)) {
        lo -= 1.0;
        hi += 1.0;
    }
    const Eigen::Index n = series.front().values->size();
    const double dx = n > 1 ? w / static_cast<double>(n - 1) : 0.0;
    auto px = [&](Eigen::Index i) { return x0 + dx * static_cast<double>(i); };
    auto py = [&](double v) { return y0 + h - (v - lo) / (hi - lo) * h; };

    out += fmt::format("<g class=\"panel\" id=\"{}\">\n", xml_escape(heading));
    out += fmt::format("<rect x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" height=\"{:.3f}\" fill=\"none\" "
                       "stroke=\"#888\"/>\n",
                       x0, y0, w, h);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"13\">{}</text>\n", x0, y0 - 8,
                       xml_escape(heading));
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\" text-anchor=\"end\">{:.4g}</text>\n",
                       x0 - 4, y0 + 10, hi);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\" text-anchor=\"end\">{:.4g}</text>\n",
                       x0 - 4, y0 + h, lo);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\">site 0</text>\n", x0, y0 + h + 14);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\" text-anchor=\"end\">site {}</text>\n",
                       x0 + w, y0 + h + 14, n - 1);
    for (std::size_t s = 0; s < series.size(); ++s) {
        std::string points;
        for (Eigen::Index i = 0; i < n; ++i) {
            points += fmt::format("{}{:.3f},{:.3f}", i == 0 ? "" : " ", px(i), py((*series[s].values)[i]));
        }
        out += fmt::format("<polyline class=\"series\" data-label=\"{}\" fill=\"none\" stroke=\"{}\" "
                           "stroke-width=\"1.5\" points=\"{}\"/>\n",
                           series[s].label, series[s].color, points);
        const double ly = y0 + 14 + 14 * static_cast<double>(s);
        out += fmt::format("<line x1=\"{:.3f}\" y1=\"{:.3f}\" x2=\"{:.3f}\" y2=\"{:.3f}\" stroke=\"{}\" "
                           "stroke-width=\"2\"/>\n",
                           x0 + w - 110, ly - 4, x0 + w - 90, ly - 4, series[s].color);
        out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\">{}</text>\n", x0 + w - 85, ly,
                           series[s].label);
    }
    out += "</g>\n";
}

constexpr const char* kTrueColor = "#000000";
constexpr const char* kNnColor = "#d95f02";
constexpr const char* kJennColor = "#1b63b8";

// Diverging blue-white-red map of v / scale, clamped to [-1, 1].
std::string diverging_color(double v, double scale) {
    const double t = std::clamp(v / scale, -1.0, 1.0);
    const auto fade = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(t))));
    return t >= 0.0 ? fmt::format("#ff{:02x}{:02x}", fade, fade) : fmt::format("#{:02x}{:02x}ff", fade, fade);
}

void heat_panel(std::string& out, double x0, double y0, double size, const std::string& id,
                const JacobianMatrix& m, double scale) {
    const double cell = size / static_cast<double>(m.rows());
    out += fmt::format("<g class=\"panel heatmap\" id=\"{}\" data-scale=\"{}\">\n", id, scale);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"13\">{}</text>\n", x0, y0 - 8, id);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out += fmt::format("<rect class=\"cell\" x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" height=\"{:.3f}\" "
                               "fill=\"{}\" data-value=\"{}\"/>\n",
                               x0 + cell * static_cast<double>(c), y0 + cell * static_cast<double>(r), cell, cell,
                               diverging_color(m(r, c), scale), m(r, c));
        }
    }
    out += fmt::format("<rect x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" height=\"{:.3f}\" fill=\"none\" "
                       "stroke=\"#888\"/>\n",
                       x0, y0, size, size);
    out += "</g>\n";
}

void legend(std::string& out, double x0, double y0, const std::string& id, const std::string& label, double scale) {
    constexpr int kSwatches = 21;
    constexpr double kWidth = 12.0;
    out += fmt::format("<g class=\"legend\" id=\"{}\" data-min=\"{}\" data-max=\"{}\">\n", id, -scale,
                       scale);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"11\">{}</text>\n", x0, y0 - 6,
                       xml_escape(label));
    for (int i = 0; i < kSwatches; ++i) {
        const double v = scale * (2.0 * i / (kSwatches - 1) - 1.0);
        out += fmt::format("<rect class=\"legend-swatch\" x=\"{:.3f}\" y=\"{:.3f}\" width=\"{:.3f}\" "
                           "height=\"12\" fill=\"{}\"/>\n",
                           x0 + kWidth * i, y0, kWidth, diverging_color(v, scale));
    }
    const double right = x0 + kWidth * kSwatches;
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\">{:.4g}</text>\n", x0, y0 + 24, -scale);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\" text-anchor=\"middle\">0</text>\n",
                       (x0 + right) / 2, y0 + 24);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"10\" text-anchor=\"end\">{:.4g}</text>\n", right,
                       y0 + 24, scale);
    out += "</g>\n";
}

std::string svg_open(double width, double height, const std::string& title) {
    return fmt::format("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
                       "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
                       "viewBox=\"0 0 {0:.0f} {1:.0f}\" font-family=\"sans-serif\">\n"
                       "<title>{2}</title>\n"
                       "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n"
                       "<text x=\"20\" y=\"24\" font-size=\"15\">{2}</text>\n",
                       width, height, xml_escape(title));
}

double max_abs(std::initializer_list<const JacobianMatrix*> ms) {
    double m = 0.0;
    for (const auto* p : ms) {
        m = std::max(m, p->cwiseAbs().maxCoeff());
    }
    return m > 0.0 ? m : 1.0;
}

} // namespace

std::string profile_svg(const ComparisonProfile& p, const std::string& title) {
    if (p.size() == 0) {
        throw ShapeError("profile_svg: empty profile");
    }
    std::string out = svg_open(760, 600, title);
    line_panel(out, 70, 60, 660, 220, "(a) outputs",
               {{&p.y_true, "true", kTrueColor}, {&p.y_nn, "nn", kNnColor}, {&p.y_jenn, "jenn", kJennColor}});
    line_panel(out, 70, 340, 660, 220, "(b) absolute difference",
               {{&p.abs_diff_nn, "|nn - true|", kNnColor}, {&p.abs_diff_jenn, "|jenn - true|", kJennColor}});
    out += "</svg>\n";
    return out;
}

std::string jacobian_svg(const JacobianComparison& c, const std::string& title) {
    if (c.j_true.size() == 0) {
        throw ShapeError("jacobian_svg: empty Jacobian");
    }
    constexpr double kPanel = 220.0;
    constexpr double kGap = 40.0;
    const double jac_scale = max_abs({&c.j_true, &c.j_nn, &c.j_jenn});
    const double dev_scale = max_abs({&c.dev_nn, &c.dev_jenn});

    std::string out = svg_open(3 * kPanel + 4 * kGap, 2 * kPanel + 200, title);
    const double top = 70.0;
    const double bottom = top + kPanel + 60.0;
    heat_panel(out, kGap, top, kPanel, "j_true", c.j_true, jac_scale);
    heat_panel(out, 2 * kGap + kPanel, top, kPanel, "j_nn", c.j_nn, jac_scale);
    heat_panel(out, 3 * kGap + 2 * kPanel, top, kPanel, "j_jenn", c.j_jenn, jac_scale);
    heat_panel(out, 2 * kGap + kPanel, bottom, kPanel, "dev_nn", c.dev_nn, dev_scale);
    heat_panel(out, 3 * kGap + 2 * kPanel, bottom, kPanel, "dev_jenn", c.dev_jenn, dev_scale);
    legend(out, kGap, bottom + 20, "legend_jacobian", "Jacobian entries", jac_scale);
    legend(out, kGap, bottom + 90, "legend_deviation", "deviation from true", dev_scale);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"11\">frob_rmse nn = {:.6g}</text>\n", kGap,
                       bottom + 150, c.frob_rmse_nn);
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.3f}\" font-size=\"11\">frob_rmse jenn = {:.6g}</text>\n", kGap,
                       bottom + 166, c.frob_rmse_jenn);
    out += "</svg>\n";
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::filesystem::path write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) {
        throw Error(fmt::format("failed writing '{}'", path.string()));
    }
    return path;
}

} // namespace

std::vector<std::filesystem::path> export_figure_data(const FigureData& d, const std::filesystem::path& dir,
                                                      ExportFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
    }
    std::vector<std::filesystem::path> written;
    if (format == ExportFormat::csv) {
        written.push_back(write_text(dir / "fig2_forecast.csv", profile_csv(d.forecast)));
        written.push_back(write_text(dir / "fig3_tlm.csv", profile_csv(d.tlm)));
        written.push_back(write_text(dir / "fig4_adj.csv", profile_csv(d.adj)));
        written.push_back(write_text(dir / "fig5_jacobian.csv", jacobian_csv(d.jacobian)));
        written.push_back(write_text(dir / "summary.csv", summary_csv(d)));
    } else {
        const auto suffix = fmt::format(" (seed {}, record {})", d.seed, d.record);
        written.push_back(write_text(dir / "fig2_forecast.svg", profile_svg(d.forecast, "One-step forecast" + suffix)));
        written.push_back(write_text(dir / "fig3_tlm.svg", profile_svg(d.tlm, "Tangent linear response" + suffix)));
        written.push_back(write_text(dir / "fig4_adj.svg", profile_svg(d.adj, "Adjoint response" + suffix)));
        written.push_back(write_text(dir / "fig5_jacobian.svg", jacobian_svg(d.jacobian, "Jacobian" + suffix)));
    }
    return written;
}

} // namespace jenn
