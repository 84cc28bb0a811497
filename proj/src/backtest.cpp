#include "saefin/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "saefin/csv.hpp"
#include "saefin/metrics.hpp"

namespace saefin {

void TradingConfig::validate() const {
  if (in_sample.first > in_sample.last || out_of_sample.first > out_of_sample.last) {
    throw InputError("trading windows must have first <= last");
  }
  if (!(in_sample.last < out_of_sample.first)) {
    throw InputError("in-sample window must end before the out-of-sample window starts");
  }
  if (!(entry_band > 0.0) || !(entry_band < stop_band)) throw InputError("need 0 < entry_band < stop_band");
  if (!(transaction_cost >= 0.0)) throw InputError("transaction_cost must be non-negative");
  if (!(initial_cash > 0.0)) throw InputError("initial_cash must be positive");
  if (!(coint_p_max > 0.0 && coint_p_max < 1.0)) throw InputError("coint_p_max must lie in (0, 1)");
  if (min_overlap_days < 3) throw InputError("min_overlap_days must be at least 3");
}

void AccessAudit::merge(const AccessAudit& other) {
  out_of_window += other.out_of_window;
  look_ahead += other.look_ahead;
  reads += other.reads;
  notes.insert(notes.end(), other.notes.begin(), other.notes.end());
}

// ---------------------------------------------------------------- WindowedPrices

WindowedPrices::WindowedPrices(const PriceSeries& series, DateWindow window, AccessAudit& audit)
    : series_(&series), window_(window), audit_(&audit) {
  const auto& obs = series.observations;
  auto lo = std::lower_bound(obs.begin(), obs.end(), window.first,
                             [](const PriceObservation& o, Date d) { return o.date < d; });
  auto hi = std::upper_bound(obs.begin(), obs.end(), window.last,
                             [](Date d, const PriceObservation& o) { return d < o.date; });
  first_ = static_cast<std::size_t>(lo - obs.begin());
  last_ = static_cast<std::size_t>(hi - obs.begin());
}

void WindowedPrices::check(Date d) const {
  ++audit_->reads;
  if (!window_.contains(d)) ++audit_->out_of_window;
  if (clock_ && d > *clock_) ++audit_->look_ahead;
}

Date WindowedPrices::date(std::size_t i) const {
  if (i >= size()) throw InputError("WindowedPrices index out of range");
  return series_->observations[first_ + i].date;
}

double WindowedPrices::price(std::size_t i) const {
  if (i >= size()) throw InputError("WindowedPrices index out of range");
  const auto& o = series_->observations[first_ + i];
  check(o.date);
  return o.adj_close;
}

std::optional<double> WindowedPrices::price_on_or_before(Date d) const {
  const auto& obs = series_->observations;
  auto it = std::upper_bound(obs.begin() + static_cast<std::ptrdiff_t>(first_),
                             obs.begin() + static_cast<std::ptrdiff_t>(last_), d,
                             [](Date x, const PriceObservation& o) { return x < o.date; });
  if (it == obs.begin() + static_cast<std::ptrdiff_t>(first_)) return std::nullopt;
  --it;
  check(it->date);
  return it->adj_close;
}

// ---------------------------------------------------------------- selection

std::vector<CandidatePair> preselect_pairs(const YearClustering& clustering, std::span<const YearPanel> panels,
                                           const TradingConfig& config) {
  const int y0 = config.in_sample.first_year();
  const int y1 = config.in_sample.last_year();
  std::vector<const YearPanel*> window;
  for (const auto& p : panels) {
    if (p.year >= y0 && p.year <= y1) window.push_back(&p);
  }
  std::sort(window.begin(), window.end(), [](const auto* a, const auto* b) { return a->year < b->year; });

  std::vector<CandidatePair> out;
  for (const auto& cluster : clustering.clusters) {
    for (std::size_t i = 0; i < cluster.size(); ++i) {
      for (std::size_t j = i + 1; j < cluster.size(); ++j) {
        std::vector<double> ra, rb;
        for (const auto* p : window) {
          auto ia = p->returns.find(cluster[i]);
          auto ib = p->returns.find(cluster[j]);
          if (ia == p->returns.end() || ib == p->returns.end()) continue;
          ra.insert(ra.end(), ia->second.values.begin(), ia->second.values.end());
          rb.insert(rb.end(), ib->second.values.begin(), ib->second.values.end());
        }
        if (ra.size() < 12) continue;
        try {
          const double rho = pearson(ra, rb);
          if (rho > config.preselect_corr_min) out.push_back({cluster[i], cluster[j], rho});
        } catch (const UndefinedError&) {
        }
      }
    }
  }
  return out;
}

AlignedPrices align_prices(const PriceSeries& a, const PriceSeries& b, DateWindow window, AccessAudit& audit) {
  WindowedPrices wa(a, window, audit);
  WindowedPrices wb(b, window, audit);
  AlignedPrices out;
  std::size_t i = 0, j = 0;
  while (i < wa.size() && j < wb.size()) {
    const Date da = wa.date(i);
    const Date db = wb.date(j);
    if (da < db) {
      ++i;
    } else if (db < da) {
      ++j;
    } else {
      out.dates.push_back(da);
      out.a.push_back(wa.price(i));
      out.b.push_back(wb.price(j));
      ++i;
      ++j;
    }
  }
  return out;
}

SpreadModel spread_model(const CompanyId& id_a, const CompanyId& id_b, const OlsFit& fit) {
  SpreadModel m;
  m.id_a = id_a;
  m.id_b = id_b;
  m.alpha = fit.alpha;
  m.beta = fit.beta;
  const auto& r = fit.residuals;
  if (r.size() < 2) throw InputError("spread_model needs at least 2 residuals");
  double sum = 0.0;
  for (double v : r) sum += v;
  m.mean = sum / static_cast<double>(r.size());
  double ss = 0.0;
  for (double v : r) ss += (v - m.mean) * (v - m.mean);
  m.sd = std::sqrt(ss / static_cast<double>(r.size() - 1));
  return m;
}

SelectionResult select_cointegrated(std::span<const CandidatePair> pairs, const PriceBook& prices,
                                    const TradingConfig& config, AccessAudit& access) {
  SelectionResult result;
  CointConfig cc;
  cc.p_max = config.coint_p_max;
  cc.min_length = config.min_overlap_days;
  for (const auto& pair : pairs) {
    auto [id_a, id_b] = std::minmax(pair.id_a, pair.id_b);
    auto pa = prices.find(id_a);
    auto pb = prices.find(id_b);
    if (pa == prices.end() || pb == prices.end()) {
      result.audit.push_back(fmt::format("{},{}: skipped, missing prices", id_a, id_b));
      continue;
    }
    const auto aligned = align_prices(pa->second, pb->second, config.in_sample, access);
    if (aligned.dates.size() < config.min_overlap_days) {
      result.audit.push_back(fmt::format("{},{}: skipped, {} overlapping in-sample days < {}", id_a, id_b,
                                         aligned.dates.size(), config.min_overlap_days));
      continue;
    }
    CointResult coint;
    try {
      coint = engle_granger(id_a, aligned.a, id_b, aligned.b, cc);
    } catch (const Error& e) {
      result.audit.push_back(fmt::format("{},{}: skipped, {}", id_a, id_b, e.what()));
      continue;
    }
    result.tested.push_back(coint);
    if (!coint.cointegrated) continue;
    const auto spread = spread_model(id_a, id_b, ols(aligned.a, aligned.b));
    if (coint.zero_variance || !(spread.sd > 0.0)) {
      result.audit.push_back(fmt::format("{},{}: excluded, in-sample spread has zero variance", id_a, id_b));
      continue;
    }
    result.selected.push_back({coint, spread});
  }
  return result;
}

// ---------------------------------------------------------------- simulation

std::string_view to_string(SpreadSide s) { return s == SpreadSide::LongSpread ? "long_spread" : "short_spread"; }
std::string_view to_string(TradeAction a) { return a == TradeAction::Open ? "open" : "close"; }
std::string_view to_string(TradeReason r) {
  switch (r) {
    case TradeReason::BandEntry: return "band_entry";
    case TradeReason::MeanExit: return "mean_exit";
    case TradeReason::StopLoss: return "stop_loss";
    case TradeReason::ForcedClose: return "forced_close";
  }
  return "?";
}

double PairTradeLog::realized_pnl() const {
  double sum = 0.0;
  for (double v : round_trip_pnl) sum += v;
  return sum;
}

namespace {

double side_sign(SpreadSide s) { return s == SpreadSide::LongSpread ? 1.0 : -1.0; }

/// Mark-to-market of a position opened at `open` (before costs).
double position_value(const TradeEvent& open, double beta, double pa, double pb) {
  return side_sign(open.side) * ((pa - open.price_a) - beta * (pb - open.price_b));
}

double notional(double beta, double pa, double pb) { return pa + std::abs(beta) * pb; }

}  // namespace

PairTradeLog simulate_pair(const SpreadModel& spread, const PriceSeries& price_a, const PriceSeries& price_b,
                           const TradingConfig& config, AccessAudit& audit) {
  PairTradeLog log;
  log.spread = spread;
  if (!(spread.sd > 0.0)) throw UndefinedError(fmt::format("{},{}: spread sd is zero", spread.id_a, spread.id_b));
  WindowedPrices wa(price_a, config.out_of_sample, audit);
  WindowedPrices wb(price_b, config.out_of_sample, audit);

  std::vector<std::pair<std::size_t, std::size_t>> days;  // common dates
  for (std::size_t i = 0, j = 0; i < wa.size() && j < wb.size();) {
    if (wa.date(i) < wb.date(j)) {
      ++i;
    } else if (wb.date(j) < wa.date(i)) {
      ++j;
    } else {
      days.emplace_back(i++, j++);
    }
  }

  const double upper_entry = spread.mean + config.entry_band * spread.sd;
  const double lower_entry = spread.mean - config.entry_band * spread.sd;
  const double stop_distance = config.stop_band * spread.sd;
  std::optional<TradeEvent> open;

  auto close = [&](const TradeEvent& at, TradeReason reason) {
    TradeEvent ev = at;
    ev.action = TradeAction::Close;
    ev.side = open->side;
    ev.reason = reason;
    const double gross = position_value(*open, spread.beta, ev.price_a, ev.price_b);
    const double cost = config.transaction_cost * (notional(spread.beta, open->price_a, open->price_b) +
                                                   notional(spread.beta, ev.price_a, ev.price_b));
    ev.pnl = gross - cost;
    log.events.push_back(ev);
    log.round_trip_pnl.push_back(ev.pnl);
    open.reset();
  };

  for (std::size_t k = 0; k < days.size(); ++k) {
    const auto [i, j] = days[k];
    const Date today = wa.date(i);
    wa.set_clock(today);
    wb.set_clock(today);
    TradeEvent now;
    now.date = today;
    now.price_a = wa.price(i);
    now.price_b = wb.price(j);
    now.spread = now.price_a - spread.alpha - spread.beta * now.price_b;
    const bool last_day = k + 1 == days.size();

    if (open) {
      const double dev = now.spread - spread.mean;
      if (std::abs(dev) > stop_distance) {
        close(now, TradeReason::StopLoss);
      } else if ((open->side == SpreadSide::ShortSpread && now.spread <= spread.mean) ||
                 (open->side == SpreadSide::LongSpread && now.spread >= spread.mean)) {
        close(now, TradeReason::MeanExit);
      } else if (last_day) {
        close(now, TradeReason::ForcedClose);
      }
      continue;
    }
    if (last_day) continue;
    if (now.spread > upper_entry || now.spread < lower_entry) {
      now.action = TradeAction::Open;
      now.reason = TradeReason::BandEntry;
      now.side = now.spread > upper_entry ? SpreadSide::ShortSpread : SpreadSide::LongSpread;
      now.pnl = 0.0;
      open = now;
      log.events.push_back(now);
    }
  }
  return log;
}

PortfolioTrajectory portfolio_trajectory(std::string method, std::span<const PairTradeLog> logs,
                                         const PriceBook& prices, const TradingConfig& config,
                                         AccessAudit& audit) {
  PortfolioTrajectory traj;
  traj.method = std::move(method);

  struct Legs {
    std::optional<WindowedPrices> a;
    std::optional<WindowedPrices> b;
  };
  std::vector<Legs> legs(logs.size());
  std::set<Date> calendar;
  for (std::size_t k = 0; k < logs.size(); ++k) {
    const auto& sp = logs[k].spread;
    auto ia = prices.find(sp.id_a);
    auto ib = prices.find(sp.id_b);
    if (ia == prices.end() || ib == prices.end()) {
      throw InputError(fmt::format("{},{}: prices missing for portfolio accounting", sp.id_a, sp.id_b));
    }
    legs[k].a.emplace(ia->second, config.out_of_sample, audit);
    legs[k].b.emplace(ib->second, config.out_of_sample, audit);
    for (const auto* w : {&*legs[k].a, &*legs[k].b}) {
      for (std::size_t i = 0; i < w->size(); ++i) calendar.insert(w->date(i));
    }
  }

  double cash = config.initial_cash;
  std::vector<std::size_t> cursor(logs.size(), 0);  // next event per log
  std::vector<std::optional<TradeEvent>> open(logs.size());

  for (const Date today : calendar) {
    double unrealized = 0.0;
    for (std::size_t k = 0; k < logs.size(); ++k) {
      const auto& events = logs[k].events;
      while (cursor[k] < events.size() && events[cursor[k]].date <= today) {
        const auto& ev = events[cursor[k]++];
        if (ev.action == TradeAction::Open) {
          open[k] = ev;
        } else {
          cash += ev.pnl;
          open[k].reset();
        }
      }
      if (!open[k]) continue;
      auto& la = *legs[k].a;
      auto& lb = *legs[k].b;
      la.set_clock(today);
      lb.set_clock(today);
      const auto pa = la.price_on_or_before(today);
      const auto pb = lb.price_on_or_before(today);
      if (!pa || !pb) continue;  // opened on a shared date, so both exist from then on
      const auto has_exact = [&](const WindowedPrices& w) {
        for (std::size_t i = w.size(); i-- > 0;) {
          if (w.date(i) == today) return true;
          if (w.date(i) < today) break;
        }
        return false;
      };
      if (!has_exact(la) || !has_exact(lb)) {
        ++traj.carried_prices;
        audit.notes.push_back(fmt::format("{},{}: carried last price forward on {}", logs[k].spread.id_a,
                                          logs[k].spread.id_b, format_date(today)));
      }
      unrealized += position_value(*open[k], logs[k].spread.beta, *pa, *pb);
    }
    traj.dates.push_back(today);
    traj.cash.push_back(cash);
    traj.unrealized.push_back(unrealized);
    traj.value.push_back(cash + unrealized);
  }
  return traj;
}

double sharpe_ratio(const PortfolioTrajectory& trajectory) {
  const auto& v = trajectory.value;
  if (v.size() < 30) throw UndefinedError(fmt::format("Sharpe needs >= 30 observations, got {}", v.size()));
  std::vector<double> r;
  r.reserve(v.size() - 1);
  for (std::size_t t = 1; t < v.size(); ++t) {
    if (!(v[t - 1] > 0.0)) throw UndefinedError("Sharpe undefined: non-positive portfolio value");
    r.push_back(v[t] / v[t - 1] - 1.0);
  }
  double mean = 0.0;
  for (double x : r) mean += x;
  mean /= static_cast<double>(r.size());
  double ss = 0.0;
  for (double x : r) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(r.size() - 1));
  if (!(sd > 0.0)) throw UndefinedError("Sharpe undefined: zero return variance");
  return mean / sd * std::sqrt(252.0);
}

void write_trade_log(std::ostream& out, std::span<const PairTradeLog> logs) {
  out << "id_a,id_b,date,action,side,spread,pnl\n";
  for (const auto& log : logs) {
    for (const auto& ev : log.events) {
      out << log.spread.id_a << ',' << log.spread.id_b << ',' << format_date(ev.date) << ',' << to_string(ev.action);
      if (ev.action == TradeAction::Close) out << ':' << to_string(ev.reason);
      out << ',' << to_string(ev.side) << ',' << csv::fmt_double(ev.spread) << ',' << csv::fmt_double(ev.pnl) << '\n';
    }
  }
}

void write_trajectory(std::ostream& out, const PortfolioTrajectory& trajectory) {
  out << "date,cash,unrealized,V\n";
  for (std::size_t t = 0; t < trajectory.dates.size(); ++t) {
    out << format_date(trajectory.dates[t]) << ',' << csv::fmt_double(trajectory.cash[t]) << ','
        << csv::fmt_double(trajectory.unrealized[t]) << ',' << csv::fmt_double(trajectory.value[t]) << '\n';
  }
}

void write_backtest_summary(std::ostream& out, std::span<const BacktestSummary> rows) {
  out << "method,pairs_traded,round_trips,sharpe\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.pairs_traded << ',' << r.round_trips << ','
        << (r.sharpe ? csv::fmt_double(*r.sharpe) : std::string("undefined")) << '\n';
  }
}

}  // namespace saefin
