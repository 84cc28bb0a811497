#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saefin/clustering.hpp"
#include "saefin/cointegration.hpp"
#include "saefin/corpus.hpp"
#include "saefin/date.hpp"

namespace saefin {

struct TradingConfig {
  DateWindow in_sample{make_date(2002, 1, 1), make_date(2013, 12, 31)};
  DateWindow out_of_sample{make_date(2014, 1, 1), make_date(2020, 12, 31)};
  double preselect_corr_min = 0.95;
  double coint_p_max = 0.01;
  double entry_band = 1.0;  // in-sample spread standard deviations
  double stop_band = 2.0;
  /// Proportional cost on traded notional, charged at open and at close.
  double transaction_cost = 0.0;
  double initial_cash = 1000.0;  // one pool for the whole method portfolio
  std::size_t min_overlap_days = 100;

  void validate() const;
};

/// Counts reads that fall outside the allowed window or after the simulation
/// clock. Both counters stay zero for a causal, window-respecting run.
struct AccessAudit {
  std::size_t out_of_window = 0;
  std::size_t look_ahead = 0;
  std::size_t reads = 0;
  std::vector<std::string> notes;

  void merge(const AccessAudit& other);
};

/// Price series restricted to a window; every read is checked against the
/// window and, when a clock is set, against the current simulation date.
class WindowedPrices {
 public:
  WindowedPrices(const PriceSeries& series, DateWindow window, AccessAudit& audit);

  /// Observations inside the window, in date order.
  std::size_t size() const { return last_ - first_; }
  Date date(std::size_t i) const;
  double price(std::size_t i) const;
  /// Last price on or before `d`; empty if none.
  std::optional<double> price_on_or_before(Date d) const;

  void set_clock(Date now) { clock_ = now; }

 private:
  void check(Date d) const;

  const PriceSeries* series_;
  DateWindow window_;
  AccessAudit* audit_;
  std::size_t first_ = 0;
  std::size_t last_ = 0;
  std::optional<Date> clock_;
};

struct CandidatePair {
  CompanyId id_a;  // id_a < id_b
  CompanyId id_b;
  double rho = 0.0;
};

/// Within-cluster pairs whose concatenated in-sample monthly returns have
/// rho strictly above preselect_corr_min.
std::vector<CandidatePair> preselect_pairs(const YearClustering& clustering, std::span<const YearPanel> panels,
                                           const TradingConfig& config);

/// In-sample prices of both legs on their common trading days.
struct AlignedPrices {
  std::vector<Date> dates;
  std::vector<double> a;
  std::vector<double> b;
};

AlignedPrices align_prices(const PriceSeries& a, const PriceSeries& b, DateWindow window, AccessAudit& audit);

/// Spread s_t = p_a - alpha - beta * p_b with in-sample mean and sd.
struct SpreadModel {
  CompanyId id_a;
  CompanyId id_b;
  double alpha = 0.0;
  double beta = 0.0;
  double mean = 0.0;
  double sd = 0.0;
};

SpreadModel spread_model(const CompanyId& id_a, const CompanyId& id_b, const OlsFit& fit);

struct SelectedPair {
  CointResult coint;
  SpreadModel spread;
};

struct SelectionResult {
  std::vector<CointResult> tested;      // every pair that was tested
  std::vector<SelectedPair> selected;   // p < coint_p_max and usable spread
  std::vector<std::string> audit;       // skipped pairs and reasons
};

/// Engle-Granger on in-sample prices; the dependent leg is the smaller id.
SelectionResult select_cointegrated(std::span<const CandidatePair> pairs, const PriceBook& prices,
                                    const TradingConfig& config, AccessAudit& access);

enum class SpreadSide { LongSpread, ShortSpread };
enum class TradeAction { Open, Close };
enum class TradeReason { BandEntry, MeanExit, StopLoss, ForcedClose };

std::string_view to_string(SpreadSide s);
std::string_view to_string(TradeAction a);
std::string_view to_string(TradeReason r);

struct TradeEvent {
  Date date;
  TradeAction action = TradeAction::Open;
  SpreadSide side = SpreadSide::LongSpread;
  TradeReason reason = TradeReason::BandEntry;
  double spread = 0.0;
  double price_a = 0.0;
  double price_b = 0.0;
  double pnl = 0.0;  // realized, on Close events
};

struct PairTradeLog {
  SpreadModel spread;
  std::vector<TradeEvent> events;  // alternating Open / Close
  std::vector<double> round_trip_pnl;

  double realized_pnl() const;
};

/// Walks the out-of-sample days in order. A stop-loss (|s - mean| > stop_band
/// sd) is checked before the mean exit; a flat position opens short above
/// mean + entry_band sd and long below mean - entry_band sd, from the day
/// after any close; an open position is closed on the last day. Short spread
/// is short 1 unit of a and long beta units of b.
PairTradeLog simulate_pair(const SpreadModel& spread, const PriceSeries& price_a, const PriceSeries& price_b,
                           const TradingConfig& config, AccessAudit& audit);

struct PortfolioTrajectory {
  std::string method;
  std::vector<Date> dates;
  std::vector<double> cash;
  std::vector<double> unrealized;
  std::vector<double> value;  // cash + unrealized
  std::size_t carried_prices = 0;  // open-position marks that reused a stale price
};

/// Daily portfolio accounting over the out-of-sample calendar (union of the
/// traded legs' dates): realized PnL from trades closed that day is added to
/// cash, open positions are marked to market, value = cash + unrealized.
/// Starts from one pool of initial_cash shared by all logs.
PortfolioTrajectory portfolio_trajectory(std::string method, std::span<const PairTradeLog> logs,
                                         const PriceBook& prices, const TradingConfig& config,
                                         AccessAudit& audit);

/// Annualized (sqrt 252) mean over standard deviation of daily simple returns
/// of the value series, zero risk-free rate. Throws UndefinedError for fewer
/// than 30 observations or zero variance.
double sharpe_ratio(const PortfolioTrajectory& trajectory);

/// id_a,id_b,date,action,side,spread,pnl
void write_trade_log(std::ostream& out, std::span<const PairTradeLog> logs);
/// date,cash,unrealized,V
void write_trajectory(std::ostream& out, const PortfolioTrajectory& trajectory);

struct BacktestSummary {
  std::string method;
  std::size_t pairs_traded = 0;
  std::size_t round_trips = 0;
  std::optional<double> sharpe;  // empty when undefined
};

/// method,pairs_traded,round_trips,sharpe ("undefined" when empty)
void write_backtest_summary(std::ostream& out, std::span<const BacktestSummary> rows);

}  // namespace saefin
