#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "saefin/common.hpp"

namespace saefin {

/// y = alpha + beta * x + residual.
struct OlsFit {
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> residuals;
  double r_squared = 0.0;
};

/// Least squares with intercept. Throws InputError if x is constant or the
/// series are shorter than 3.
OlsFit ols(std::span<const double> y, std::span<const double> x);

enum class AdfDeterministic { None, Constant };
enum class LagRule { Fixed, Aic };

struct AdfOptions {
  AdfDeterministic deterministic = AdfDeterministic::None;
  /// Fixed: the lag used. Aic: upper bound of the search. Defaults to
  /// schwert_max_lag(length).
  std::optional<std::size_t> max_lag;
  LagRule lag_rule = LagRule::Aic;
};

struct AdfStatistic {
  double stat = 0.0;
  std::size_t lag = 0;
  std::size_t nobs = 0;
};

/// floor(12 * (n / 100)^(1/4))
std::size_t schwert_max_lag(std::size_t n);

/// t-statistic on the lagged level in
///   ds_t = gamma * s_{t-1} + sum_i phi_i ds_{t-i} (+ c) + e_t.
/// With LagRule::Aic every lag 0..max_lag is fitted on the common sample and
/// the smallest AIC wins (ties to fewer lags); the chosen lag is then refitted
/// on its full sample. Throws UndefinedError for a singular design.
AdfStatistic adf_statistic(std::span<const double> series, const AdfOptions& options = {});

enum class PValueCase {
  StandardConstant,  // ADF with constant, one I(1) series
  EgResiduals2Var,   // Engle-Granger residuals, two variables
};

/// MacKinnon (1994) response-surface p-value, clamped to [1e-6, 1 - 1e-6].
double adf_pvalue(double stat, PValueCase which);

/// MacKinnon (2010) finite-sample critical value; level is 0.01, 0.05 or 0.10.
double adf_critical_value(PValueCase which, double level, std::size_t nobs);

struct CointConfig {
  double p_max = 0.01;
  std::size_t min_length = 100;
  AdfOptions adf{};
};

struct CointResult {
  CompanyId id_a;  // dependent leg
  CompanyId id_b;
  double alpha = 0.0;
  double beta = 0.0;
  double adf_stat = 0.0;
  std::size_t lag = 0;
  double p_value = 1.0;
  bool cointegrated = false;
  bool zero_variance = false;  // residuals identically zero
};

/// Regresses a on b, then runs the residual ADF (no deterministic terms) and
/// reads the p-value from the two-variable cointegration surface.
CointResult engle_granger(const CompanyId& id_a, std::span<const double> price_a, const CompanyId& id_b,
                          std::span<const double> price_b, const CointConfig& config = {});

/// id_a,id_b,beta,alpha,adf_stat,lag,p_value,cointegrated
void write_cointegration(std::ostream& out, std::span<const CointResult> results);

}  // namespace saefin
