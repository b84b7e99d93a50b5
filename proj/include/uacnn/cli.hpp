#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "uacnn/error.hpp"
#include "uacnn/json_io.hpp"
#include "uacnn/loss.hpp"
#include "uacnn/mc_oracle.hpp"
#include "uacnn/network.hpp"
#include "uacnn/nonlinear_layers.hpp"

namespace uacnn::cli {

/// Process exit codes.
enum ExitCode : int { kOk = 0, kValidationFailure = 1, kIoOrParse = 2 };

inline int exit_code_for(const Error& e) {
  return (e.kind() == ErrorKind::Io || e.kind() == ErrorKind::Parse) ? kIoOrParse
                                                                     : kValidationFailure;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Write via a sibling temporary and rename, so `path` is either absent (or
/// untouched) or holds the complete contents.
inline void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
    out << contents;
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      fail(ErrorKind::Io, "short write to '" + path + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::Io, "cannot move output into place at '" + path + "'");
  }
}

/// Shortest round-trip decimal, '.' separator regardless of locale.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline Json to_json(const McEstimate& est) {
  return Json{{"shape", est.shape},         {"means", est.means},
              {"variances", est.variances}, {"se_mean", est.se_mean},
              {"se_var", est.se_var},       {"samples", est.samples},
              {"seed", est.seed}};
}

// ---------------------------------------------------------------------------
// Oracle comparison

/// Half-widths of the mean and variance acceptance bands for one element.
struct Band {
  double mean = 0.0;
  double var = 0.0;
};

enum class Judgement { StandardErrorBand, Approximation };

/// Absolute tolerances for the sigmoid layer, whose moments are approximate.
/// Largest observed errors against quadrature are about 0.018 (mean) and
/// 0.017 (variance) for input sd up to 2.
inline constexpr double kSigmoidMeanTolerance = 0.03;
inline constexpr double kSigmoidVarTolerance = 0.03;

/// Round-off allowance added to every band: exact laws evaluated along two
/// different summation orders still differ in the last bits.
inline double roundoff_floor(double value) { return 1e-12 * (1.0 + std::abs(value)); }

struct ElementDiff {
  std::size_t index = 0;
  double analytic_mean = 0.0, oracle_mean = 0.0, mean_band = 0.0;
  double analytic_var = 0.0, oracle_var = 0.0, var_band = 0.0;
};

struct RunReport {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::Flatten;
  Judgement judged_by = Judgement::StandardErrorBand;
  MomentTensor analytic;
  std::optional<McEstimate> oracle;
  double max_abs_mean_diff = 0.0;
  double max_var_ratio_dev = 0.0;  // max |oracle_var / analytic_var - 1| where analytic_var > 0
  bool pass = false;
  std::vector<ElementDiff> failures;
};

/// Band for element `i` of a sampled layer.
///  - exact linear layers: `sigmas` empirical standard errors;
///  - ReLU: `sigmas` standard errors of the rectified-Gaussian output itself,
///    since the normal-theory variance SE badly understates the spread of a
///    ReLU sample variance when the input sits far below zero;
///  - sigmoid: fixed approximation tolerance plus `sigmas` empirical SEs.
inline Band element_band(const LayerSpec& layer, const MomentTensor& input,
                         const MomentTensor& analytic, const McEstimate& est, std::size_t i,
                         double sigmas) {
  Band band;
  switch (layer.kind) {
    case LayerKind::Relu: {
      const auto ref = rectified_gaussian_moments(input.means()[i], input.variances()[i]);
      const double n = static_cast<double>(est.samples);
      band.mean = sigmas * std::sqrt(ref.variance / n);
      band.var = sigmas * std::sqrt(std::max(0.0, ref.central4 - ref.variance * ref.variance) / n);
      // When the positive tail is rare the sample mean is lumpy: one tail
      // draw moves it by about (mu + sigmas * sd) / N, which the normal
      // approximation above cannot see.
      const double lump = std::max(0.0, input.means()[i] + sigmas * std::sqrt(input.variances()[i]));
      band.mean += lump / n;
      band.var += lump * lump / n;
      break;
    }
    case LayerKind::Sigmoid:
      band.mean = kSigmoidMeanTolerance + sigmas * est.se_mean[i];
      band.var = kSigmoidVarTolerance + sigmas * est.se_var[i];
      break;
    default:
      band.mean = sigmas * est.se_mean[i];
      band.var = sigmas * est.se_var[i];
      break;
  }
  band.mean += roundoff_floor(analytic.means()[i]);
  band.var += roundoff_floor(analytic.variances()[i]);
  return band;
}

inline RunReport judge_layer(std::size_t index, const LayerSpec& layer, const MomentTensor& input,
                             const MomentTensor& analytic, const McEstimate& est, double sigmas) {
  RunReport report{index,
                   layer.kind,
                   layer.kind == LayerKind::Sigmoid ? Judgement::Approximation
                                                    : Judgement::StandardErrorBand,
                   analytic,
                   est,
                   0.0,
                   0.0,
                   true,
                   {}};
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double am = analytic.means()[i], av = analytic.variances()[i];
    const double om = est.means[i], ov = est.variances[i];
    const Band band = element_band(layer, input, analytic, est, i, sigmas);
    report.max_abs_mean_diff = std::max(report.max_abs_mean_diff, std::abs(am - om));
    if (av > 0.0) report.max_var_ratio_dev = std::max(report.max_var_ratio_dev, std::abs(ov / av - 1.0));
    if (std::abs(am - om) > band.mean || std::abs(av - ov) > band.var) {
      report.pass = false;
      report.failures.push_back({i, am, om, band.mean, av, ov, band.var});
    }
  }
  return report;
}

/// Per-layer oracle run: layer i is sampled from the analytic moments of
/// layer i - 1 with seed mix_seed(seed, i).
inline std::vector<RunReport> oracle_reports(const NetworkSpec& net, const MomentTensor& input,
                                             std::size_t samples, std::uint64_t seed,
                                             double sigmas) {
  const auto trace = forward_trace(net, input);
  std::vector<RunReport> reports;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const MomentTensor& layer_input = i == 0 ? input : trace[i - 1];
    const LayerSpec& layer = net.layers()[i];
    const McEstimate est = sample_forward(layer, layer_input, samples, mix_seed(seed, i));
    reports.push_back(judge_layer(i, layer, layer_input, trace[i], est, sigmas));
  }
  return reports;
}

/// Linear layers and ReLU decide the verdict; sigmoid is reported only.
inline bool overall_pass(const std::vector<RunReport>& reports) {
  for (const auto& r : reports) {
    if (r.judged_by == Judgement::StandardErrorBand && !r.pass) return false;
  }
  return true;
}

inline Json to_json(const RunReport& r) {
  Json failures = Json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"index", f.index},
                        {"analytic_mean", f.analytic_mean},
                        {"oracle_mean", f.oracle_mean},
                        {"mean_band", f.mean_band},
                        {"analytic_var", f.analytic_var},
                        {"oracle_var", f.oracle_var},
                        {"var_band", f.var_band}});
  }
  return Json{{"layer", r.layer},
              {"kind", to_string(r.kind)},
              {"judged_by", r.judged_by == Judgement::Approximation ? "approximation" : "se_band"},
              {"analytic", uacnn::to_json(r.analytic)},
              {"oracle", r.oracle ? to_json(*r.oracle) : Json(nullptr)},
              {"max_abs_mean_diff", r.max_abs_mean_diff},
              {"max_var_ratio_dev", r.max_var_ratio_dev},
              {"pass", r.pass},
              {"failures", std::move(failures)}};
}

inline void print_diff_table(std::ostream& err, const RunReport& r) {
  err << "layer " << r.layer << " (" << to_string(r.kind) << "): " << r.failures.size()
      << " element(s) outside band\n";
  err << "  index,analytic_mean,oracle_mean,mean_band,analytic_var,oracle_var,var_band\n";
  for (const auto& f : r.failures) {
    err << "  " << f.index << ',' << format_number(f.analytic_mean) << ','
        << format_number(f.oracle_mean) << ',' << format_number(f.mean_band) << ','
        << format_number(f.analytic_var) << ',' << format_number(f.oracle_var) << ','
        << format_number(f.var_band) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Figure data

inline std::string relu_figure_csv() {
  std::string out = "mu,sigma,mean_out,var_out\n";
  for (double sigma : {0.5, 1.0, 2.0}) {
    for (int i = 0; i <= 200; ++i) {
      const double mu = (i - 100) / 20.0;
      const GaussianScalar y = ua_relu(GaussianScalar{mu, sigma * sigma});
      out += format_number(mu) + ',' + format_number(sigma) + ',' + format_number(y.mu) + ',' +
             format_number(y.var) + '\n';
    }
  }
  return out;
}

/// Label y = 1; sigma = 0 rows are the plain loss.
inline std::string bce_figure_csv() {
  std::string out = "mu,sigma,expected_loss,standard_loss\n";
  for (double sigma : {0.0, 0.5, 1.0, 2.0}) {
    for (int i = 0; i <= 240; ++i) {
      const double mu = (i - 120) / 20.0;
      const LossMoments l = ua_bce_loss(BceInput{{mu, sigma * sigma}, 1});
      out += format_number(mu) + ',' + format_number(sigma) + ',' +
             format_number(l.expected_loss) + ',' + format_number(l.loss_at_mean) + '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Commands. Each returns an exit code and writes its artifact only on success.

inline int cmd_propagate(const std::string& network_path, const std::string& input_path,
                         const std::string& output_path, std::ostream& err) {
  try {
    const NetworkSpec net = load_network(read_file(network_path));
    const MomentTensor input = load_moment_tensor(read_file(input_path));
    const MomentTensor output = forward(net, input);
    write_file_atomic(output_path, uacnn::to_json(output).dump() + "\n");
    return kOk;
  } catch (const Error& e) {
    err << "propagate: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

inline int cmd_oracle(const std::string& network_path, const std::string& input_path,
                      std::size_t samples, std::uint64_t seed, double sigmas,
                      const std::string& report_path, std::ostream& err) {
  try {
    if (!(sigmas > 0.0)) fail(ErrorKind::InvalidArgument, "--sigmas must be > 0");
    const NetworkSpec net = load_network(read_file(network_path));
    const MomentTensor input = load_moment_tensor(read_file(input_path));
    const auto reports = oracle_reports(net, input, samples, seed, sigmas);
    const bool pass = overall_pass(reports);

    Json layers = Json::array();
    for (const auto& r : reports) {
      layers.push_back(to_json(r));
      if (!r.pass) print_diff_table(err, r);
    }
    if (!pass) {
      err << "oracle: analytic moments fall outside the " << format_number(sigmas)
          << "-sigma band\n";
      return kValidationFailure;
    }
    const Json doc{{"samples", samples}, {"seed", seed},         {"sigmas", sigmas},
                   {"pass", pass},       {"layers", std::move(layers)}};
    write_file_atomic(report_path, doc.dump(2) + "\n");
    return kOk;
  } catch (const Error& e) {
    err << "oracle: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

inline int cmd_figure(const std::string& which, const std::string& output_path,
                      std::ostream& err) {
  try {
    if (which == "relu") {
      write_file_atomic(output_path, relu_figure_csv());
    } else if (which == "bce") {
      write_file_atomic(output_path, bce_figure_csv());
    } else {
      fail(ErrorKind::InvalidArgument, "unknown figure '" + which + "' (expected relu or bce)");
    }
    return kOk;
  } catch (const Error& e) {
    err << "figure: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace uacnn::cli
