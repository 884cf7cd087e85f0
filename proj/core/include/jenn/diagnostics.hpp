#pragma once

#include "jenn/dataset.hpp"
#include "jenn/emulator.hpp"
#include "jenn/lorenz96.hpp"
#include "jenn/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace jenn {

/// Per-site outputs of the truth and both networks for one probe.
struct ComparisonProfile {
    std::vector<int> site;
    Vector y_true;
    Vector y_nn;
    Vector y_jenn;
    Vector abs_diff_nn;   ///< |y_nn - y_true|
    Vector abs_diff_jenn; ///< |y_jenn - y_true|

    Eigen::Index size() const { return y_true.size(); }
};

struct JacobianComparison {
    JacobianMatrix j_true;
    JacobianMatrix j_nn;
    JacobianMatrix j_jenn;
    JacobianMatrix dev_nn;   ///< j_nn - j_true
    JacobianMatrix dev_jenn; ///< j_jenn - j_true
    double frob_rmse_nn = 0.0;   ///< ||dev_nn||_F / n
    double frob_rmse_jenn = 0.0; ///< ||dev_jenn||_F / n
};

/// Builds a profile from the three output vectors.
ComparisonProfile make_profile(const Vector& y_true, const Vector& y_nn, const Vector& y_jenn);

/// One-step forecasts against step_rk4.
ComparisonProfile compare_forecast(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                                   const StateVector& x);

/// Tangent responses against step_tlm.
ComparisonProfile compare_tlm(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                              const StateVector& x, const StateVector& dx);

/// Adjoint responses against step_adj.
ComparisonProfile compare_adj(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                              const StateVector& x, const StateVector& yhat);

JacobianComparison compare_jacobian(const Emulator& nn, const Emulator& jenn, const Lorenz96Config& cfg,
                                    const StateVector& x);

/// Mean absolute site error of each network, averaged over probes.
struct ProbeStatistics {
    Eigen::Index probes = 0;
    double forecast_nn = 0.0;
    double forecast_jenn = 0.0;
    double tlm_nn = 0.0;
    double tlm_jenn = 0.0;
    double adj_nn = 0.0;
    double adj_jenn = 0.0;
    Eigen::Index jacobian_states = 0;
    double frob_rmse_nn = 0.0;
    double frob_rmse_jenn = 0.0;
};

/// Aggregates over the first `probes` records of `sens` (all if larger) and
/// the Jacobians at the first `jacobian_states` of those records.
ProbeStatistics aggregate_probes(const Emulator& nn, const Emulator& jenn, const SensitivitySet& sens,
                                 Eigen::Index probes = 100, Eigen::Index jacobian_states = 20);

/// Everything needed to redraw the four comparison figures.
struct FigureData {
    Seed seed = 0;            ///< seed of the probe selection
    Eigen::Index record = 0;  ///< record of the sensitivity set used
    ComparisonProfile forecast;
    ComparisonProfile tlm;
    ComparisonProfile adj;
    JacobianComparison jacobian;
};

/// Figure data for record `record` of `sens`.
FigureData collect_figure_data(const Emulator& nn, const Emulator& jenn, const SensitivitySet& sens,
                               Eigen::Index record, Seed seed);

enum class ExportFormat { csv, svg };

/// Writes fig2_forecast, fig3_tlm, fig4_adj and fig5_jacobian (.csv or .svg)
/// into `dir`, creating it if needed, plus summary.csv for the csv format.
/// Returns the written paths in that order.
std::vector<std::filesystem::path> export_figure_data(const FigureData& data, const std::filesystem::path& dir,
                                                      ExportFormat format);

/// Column headers of each exported table.
inline constexpr const char* kProfileCsvHeader = "site,y_true,y_nn,y_jenn,abs_diff_nn,abs_diff_jenn";
inline constexpr const char* kJacobianCsvHeader = "row,col,j_true,j_nn,j_jenn,dev_nn,dev_jenn";
inline constexpr const char* kSummaryCsvHeader = "figure,statistic,value";

std::string profile_csv(const ComparisonProfile& profile);
std::string jacobian_csv(const JacobianComparison& cmp);
std::string summary_csv(const FigureData& data);
std::string profile_svg(const ComparisonProfile& profile, const std::string& title);
std::string jacobian_svg(const JacobianComparison& cmp, const std::string& title);

} // namespace jenn
