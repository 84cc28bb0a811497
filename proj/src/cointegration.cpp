#include "saefin/cointegration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "mackinnon_tables.hpp"
#include "saefin/csv.hpp"

namespace saefin {

OlsFit ols(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size()) throw InputError("ols: length mismatch");
  if (y.size() < 3) throw InputError("ols: need at least 3 observations");
  const double n = static_cast<double>(y.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw InputError("ols: regressor is constant");
  OlsFit fit;
  fit.beta = sxy / sxx;
  fit.alpha = my - fit.beta * mx;
  fit.residuals.resize(y.size());
  double rss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    fit.residuals[i] = y[i] - fit.alpha - fit.beta * x[i];
    rss += fit.residuals[i] * fit.residuals[i];
  }
  fit.r_squared = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  return fit;
}

std::size_t schwert_max_lag(std::size_t n) {
  return static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

namespace {

struct AdfFit {
  double stat;
  double aic;
  std::size_t nobs;
};

// Fits the ADF regression with `lag` lagged differences on observations
// diff[first..], where first >= lag.
AdfFit fit_adf(std::span<const double> s, const std::vector<double>& diff, std::size_t lag, std::size_t first,
               bool constant) {
  const std::size_t nobs = diff.size() - first;
  const std::size_t k = 1 + lag + (constant ? 1 : 0);
  if (nobs <= k) throw UndefinedError("ADF regression has no residual degrees of freedom");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(nobs), static_cast<Eigen::Index>(k));
  Eigen::VectorXd y(static_cast<Eigen::Index>(nobs));
  for (std::size_t r = 0; r < nobs; ++r) {
    const std::size_t t = first + r;  // diff[t] = s[t+1] - s[t]
    const auto row = static_cast<Eigen::Index>(r);
    y(row) = diff[t];
    x(row, 0) = s[t];
    for (std::size_t i = 1; i <= lag; ++i) x(row, static_cast<Eigen::Index>(i)) = diff[t - i];
    if (constant) x(row, static_cast<Eigen::Index>(k - 1)) = 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-12);
  if (qr.rank() < static_cast<Eigen::Index>(k)) throw UndefinedError("ADF design matrix is singular");
  const Eigen::VectorXd coef = qr.solve(y);
  const double rss = (y - x * coef).squaredNorm();
  const double dof = static_cast<double>(nobs - k);
  const double sigma2 = rss / dof;
  Eigen::MatrixXd xtx = x.transpose() * x;
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  e0(0) = 1.0;
  const Eigen::VectorXd col0 = xtx.ldlt().solve(e0);
  const double se = std::sqrt(sigma2 * col0(0));
  if (!(se > 0.0) || !std::isfinite(se)) throw UndefinedError("ADF standard error is zero or undefined");
  const double n = static_cast<double>(nobs);
  const double llf = -0.5 * n * (std::log(2.0 * std::numbers::pi) + std::log(rss / n) + 1.0);
  return AdfFit{coef(0) / se, -2.0 * llf + 2.0 * static_cast<double>(k), nobs};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

AdfStatistic adf_statistic(std::span<const double> series, const AdfOptions& options) {
  const std::size_t n = series.size();
  const std::size_t max_lag = options.max_lag.value_or(schwert_max_lag(n));
  if (n <= max_lag + 2) {
    throw InputError(fmt::format("ADF needs more than max_lag + 2 = {} observations, got {}", max_lag + 2, n));
  }
  for (double v : series) {
    if (!std::isfinite(v)) throw InputError("ADF input contains non-finite values");
  }
  std::vector<double> diff(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t) diff[t] = series[t + 1] - series[t];
  const bool constant = options.deterministic == AdfDeterministic::Constant;

  std::size_t lag = max_lag;
  if (options.lag_rule == LagRule::Aic && max_lag > 0) {
    double best_aic = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p <= max_lag; ++p) {
      const auto fit = fit_adf(series, diff, p, max_lag, constant);
      if (fit.aic < best_aic) {
        best_aic = fit.aic;
        lag = p;
      }
    }
  }
  const auto fit = fit_adf(series, diff, lag, lag, constant);
  return AdfStatistic{fit.stat, lag, fit.nobs};
}

double adf_pvalue(double stat, PValueCase which) {
  constexpr double kLo = 1e-6;
  constexpr double kHi = 1.0 - 1e-6;
  if (std::isnan(stat)) throw InputError("adf_pvalue: NaN statistic");
  const auto& s = mackinnon::kConstantSurfaces[which == PValueCase::StandardConstant ? 0 : 1];
  double p = 0.0;
  if (stat > s.tau_max) {
    p = 1.0;
  } else if (stat < s.tau_min) {
    p = 0.0;
  } else if (stat <= s.tau_star) {
    const auto& c = s.small_p;
    p = normal_cdf(c[0] + stat * (c[1] + stat * c[2]));
  } else {
    const auto& c = s.large_p;
    p = normal_cdf(c[0] + stat * (c[1] + stat * (c[2] + stat * c[3])));
  }
  return std::clamp(p, kLo, kHi);
}

double adf_critical_value(PValueCase which, double level, std::size_t nobs) {
  int row = -1;
  if (std::abs(level - 0.01) < 1e-12) row = 0;
  if (std::abs(level - 0.05) < 1e-12) row = 1;
  if (std::abs(level - 0.10) < 1e-12) row = 2;
  if (row < 0) throw InputError("critical values exist for levels 0.01, 0.05, 0.10 only");
  if (nobs == 0) throw InputError("critical value needs nobs > 0");
  const auto& b = mackinnon::kConstantCritical[which == PValueCase::StandardConstant ? 0 : 1][static_cast<std::size_t>(row)];
  const double inv = 1.0 / static_cast<double>(nobs);
  return b[0] + inv * (b[1] + inv * (b[2] + inv * b[3]));
}

CointResult engle_granger(const CompanyId& id_a, std::span<const double> price_a, const CompanyId& id_b,
                          std::span<const double> price_b, const CointConfig& config) {
  if (price_a.size() != price_b.size()) throw InputError("engle_granger: legs have different lengths");
  if (price_a.size() < config.min_length) {
    throw InputError(fmt::format("engle_granger: {} observations, need at least {}", price_a.size(), config.min_length));
  }
  CointResult result;
  result.id_a = id_a;
  result.id_b = id_b;
  const auto fit = ols(price_a, price_b);
  result.alpha = fit.alpha;
  result.beta = fit.beta;

  double scale = 0.0;
  for (double v : price_a) scale = std::max(scale, std::abs(v));
  double max_resid = 0.0;
  for (double r : fit.residuals) max_resid = std::max(max_resid, std::abs(r));
  if (max_resid <= 1e-12 * std::max(scale, 1.0)) {
    result.zero_variance = true;
    result.cointegrated = true;
    result.adf_stat = -std::numeric_limits<double>::infinity();
    result.p_value = 0.0;
    return result;
  }

  AdfOptions adf = config.adf;
  adf.deterministic = AdfDeterministic::None;
  const auto stat = adf_statistic(fit.residuals, adf);
  result.adf_stat = stat.stat;
  result.lag = stat.lag;
  result.p_value = adf_pvalue(stat.stat, PValueCase::EgResiduals2Var);
  result.cointegrated = result.p_value < config.p_max;
  return result;
}

void write_cointegration(std::ostream& out, std::span<const CointResult> results) {
  out << "id_a,id_b,beta,alpha,adf_stat,lag,p_value,cointegrated\n";
  for (const auto& r : results) {
    out << r.id_a << ',' << r.id_b << ',' << csv::fmt_double(r.beta) << ',' << csv::fmt_double(r.alpha) << ','
        << csv::fmt_double(r.adf_stat) << ',' << r.lag << ',' << csv::fmt_double(r.p_value) << ','
        << (r.cointegrated ? 1 : 0) << '\n';
  }
}

}  // namespace saefin
