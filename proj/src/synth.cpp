#include "saefin/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "saefin/csv.hpp"
#include "saefin/date.hpp"

namespace saefin {

void SynthConfig::validate() const {
  if (n_companies == 0 || n_sectors == 0) throw InputError("synth: need at least one company and one sector");
  if (n_sectors > n_companies) throw InputError("synth: n_sectors must not exceed n_companies");
  if (years < 1) throw InputError("synth: years must be >= 1");
  if (first_year < 1900 || last_year() > 2200) throw InputError("synth: years outside 1900..2200");
  if (signature_size == 0 || signature_size * n_sectors > feature_dim) {
    throw InputError("synth: need 0 < signature_size * n_sectors <= feature_dim");
  }
  if (!(signature_noise >= 0.0 && signature_noise <= 1.0)) throw InputError("synth: signature_noise must be in [0, 1]");
  if (features_per_token == 0 || features_per_token > signature_size) {
    throw InputError("synth: need 0 < features_per_token <= signature_size");
  }
  if (tokens_per_doc == 0) throw InputError("synth: tokens_per_doc must be >= 1");
  if (!(factor_vol >= 0.0) || !(idio_vol >= 0.0) || !(spread_vol >= 0.0)) {
    throw InputError("synth: volatilities must be non-negative");
  }
  if (!(std::abs(spread_phi) < 1.0)) throw InputError("synth: |spread_phi| must be < 1");
  if (!(pair_offset >= 0.0) || !(pair_beta > 0.0)) throw InputError("synth: need pair_beta > 0, pair_offset >= 0");
  if (target_rows != 0 && target_rows < n_companies) throw InputError("synth: target_rows below one row per company");
  if (target_rows > n_companies * static_cast<std::size_t>(years)) {
    throw InputError("synth: target_rows exceeds companies x years");
  }
}

namespace {

// One SIC code per division so that each sector lands in its own BISC bucket.
constexpr std::array<int, 12> kSectorSic{2834, 6021, 7372, 1311, 4911, 5311, 1521, 5045, 9111, 100, 9999, 9800};

CompanyId company_name(std::size_t i) { return fmt::format("C{:05d}", i + 1); }

std::vector<Date> trading_days(int first_year, int last_year) {
  std::vector<Date> days;
  for (Date d = make_date(first_year, 1, 1); d <= make_date(last_year, 12, 31); d += std::chrono::days{1}) {
    if (is_weekday(d)) days.push_back(d);
  }
  return days;
}

}  // namespace

SynthUniverse generate_universe(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> magnitude(1.0);

  SynthUniverse u;
  const std::size_t n = config.n_companies;
  const auto n_years = static_cast<std::size_t>(config.years);

  // sectors and signatures
  std::vector<int> sector(n);
  for (std::size_t i = 0; i < n; ++i) sector[i] = static_cast<int>(i % config.n_sectors);
  std::vector<FeatureId> perm(config.feature_dim);
  std::iota(perm.begin(), perm.end(), FeatureId{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  u.truth.signatures.resize(config.n_sectors);
  for (std::size_t s = 0; s < config.n_sectors; ++s) {
    auto& sig = u.truth.signatures[s];
    sig.assign(perm.begin() + static_cast<std::ptrdiff_t>(s * config.signature_size),
               perm.begin() + static_cast<std::ptrdiff_t>((s + 1) * config.signature_size));
    std::sort(sig.begin(), sig.end());
  }
  for (std::size_t i = 0; i < n; ++i) u.truth.sector[company_name(i)] = sector[i];

  // which company-years exist
  std::vector<std::vector<bool>> present(n, std::vector<bool>(n_years, true));
  if (config.target_rows != 0) {
    std::size_t excess = n * n_years - config.target_rows;
    for (std::size_t i = n; i-- > 0 && excess > 0;) {
      for (std::size_t y = 0; y + 1 < n_years && excess > 0; ++y) {
        present[i][y] = false;
        --excess;
      }
    }
  }

  // planted pairs: a = beta * b + offset + AR(1)
  std::vector<std::size_t> partner(n, n);  // partner[a] = b
  {
    std::vector<std::vector<std::size_t>> members(config.n_sectors);
    for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(sector[i])].push_back(i);
    for (const auto& m : members) {
      for (std::size_t k = 0; k < config.pairs_per_sector && 2 * k + 1 < m.size(); ++k) {
        const std::size_t a = m[2 * k], b = m[2 * k + 1];
        partner[a] = b;
        u.truth.pairs.push_back({company_name(a), company_name(b), config.pair_beta, config.pair_offset});
      }
    }
  }

  // daily prices and monthly log returns
  const auto days = trading_days(config.first_year, config.last_year());
  const double day_factor = config.factor_vol / std::sqrt(21.0);
  const double day_idio = config.idio_vol / std::sqrt(21.0);
  const double stationary_sd = config.spread_vol / std::sqrt(1.0 - config.spread_phi * config.spread_phi);
  std::vector<double> walk(n, 100.0);  // random-walk level of every company
  std::vector<double> noise(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (partner[i] < n) noise[i] = stationary_sd * normal(rng);
  }
  auto price_of = [&](std::size_t i) {
    if (partner[i] >= n) return walk[i];
    return std::max(0.01, config.pair_beta * walk[partner[i]] + config.pair_offset + noise[i]);
  };
  std::vector<double> prev_close(n);
  for (std::size_t i = 0; i < n; ++i) prev_close[i] = price_of(i);
  std::vector<std::vector<std::array<double, 12>>> monthly(n, std::vector<std::array<double, 12>>(n_years));
  std::vector<double> factor(config.n_sectors);

  for (std::size_t t = 0; t < days.size(); ++t) {
    for (auto& f : factor) f = day_factor * normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
      walk[i] *= std::exp(factor[static_cast<std::size_t>(sector[i])] + day_idio * normal(rng));
      if (partner[i] < n) noise[i] = config.spread_phi * noise[i] + config.spread_vol * normal(rng);
    }
    const bool month_end = t + 1 == days.size() || month_of(days[t + 1]) != month_of(days[t]);
    const auto y = static_cast<std::size_t>(year_of(days[t]) - config.first_year);
    const auto m = month_of(days[t]) - 1;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = price_of(i);
      if (config.with_prices && present[i][y]) {
        auto& series = u.prices[company_name(i)];
        series.company_id = company_name(i);
        series.observations.push_back({days[t], p});
      }
      if (month_end) {
        monthly[i][y][m] = std::log(p / prev_close[i]);
        prev_close[i] = p;
      }
    }
  }

  // documents
  for (std::size_t y = 0; y < n_years; ++y) {
    const int year = config.first_year + static_cast<int>(y);
    YearPanel panel;
    panel.year = year;
    for (std::size_t i = 0; i < n; ++i) {
      if (!present[i][y]) continue;
      const CompanyId id = company_name(i);
      const int sic = kSectorSic[static_cast<std::size_t>(sector[i]) % kSectorSic.size()];
      CompanyRecord rec{id, fmt::format("T{:05d}", i + 1), year, sic, bisc_division(sic)};
      ReturnSeries ret{id, year, monthly[i][y]};

      const auto& sig = u.truth.signatures[static_cast<std::size_t>(sector[i])];
      std::vector<TokenFeatureActivations> tokens(config.tokens_per_doc);
      for (std::size_t k = 0; k < config.tokens_per_doc; ++k) {
        auto& tok = tokens[k];
        tok.doc_id = make_doc_id(id, year);
        tok.token_index = static_cast<std::uint32_t>(k);
        std::set<FeatureId> chosen;
        while (chosen.size() < config.features_per_token) {
          const FeatureId f = unit(rng) < config.signature_noise
                                  ? static_cast<FeatureId>(rng() % config.feature_dim)
                                  : sig[rng() % sig.size()];
          if (chosen.insert(f).second) tok.entries.push_back({f, 1e-3 + magnitude(rng)});
        }
      }
      FeatureSpace space{config.feature_dim, std::max<std::size_t>(config.features_per_token, 1)};
      auto summed = sum_token_features(tokens, space);
      if (config.keep_tokens) u.tokens.insert(u.tokens.end(), tokens.begin(), tokens.end());

      panel.records.push_back(rec);
      panel.returns.emplace(id, ret);
      panel.summed_features.emplace(id, summed);
      u.metadata.push_back(rec);
      u.returns.push_back(ret);
      u.features.push_back(std::move(summed));
    }
    u.panels.push_back(std::move(panel));
  }
  return u;
}

void write_universe(const std::filesystem::path& dir, const SynthUniverse& universe) {
  std::filesystem::create_directories(dir);
  write_metadata(dir / "metadata.csv", universe.metadata);
  write_returns(dir / "returns.csv", universe.returns);
  {
    auto out = csv::open_output(dir / "features.csv");
    write_summed_features(out, universe.features);
  }
  if (!universe.prices.empty()) write_prices(dir / "prices.csv", universe.prices);
  if (!universe.tokens.empty()) {
    auto out = csv::open_output(dir / "tokens.csv");
    write_token_activations(out, universe.tokens);
  }
  auto out = csv::open_output(dir / "ground_truth.csv");
  out << "kind,key,value\n";
  for (const auto& [id, s] : universe.truth.sector) out << "sector," << id << ',' << s << '\n';
  for (std::size_t s = 0; s < universe.truth.signatures.size(); ++s) {
    for (FeatureId f : universe.truth.signatures[s]) out << "signature," << s << ',' << f << '\n';
  }
  for (const auto& p : universe.truth.pairs) out << "pair," << p.id_a << ',' << p.id_b << '\n';
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw InputError("adjusted_rand_index: labelings differ in length");
  const auto n = a.size();
  if (n < 2) return 1.0;
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t i = 0; i < n; ++i) {
    table[{a[i], b[i]}] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0, sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [_, v] : table) index += c2(v);
  for (const auto& [_, v] : rows) sum_rows += c2(v);
  for (const auto& [_, v] : cols) sum_cols += c2(v);
  const double expected = sum_rows * sum_cols / c2(static_cast<double>(n));
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (max_index == expected) return 1.0;  // both trivial partitions
  return (index - expected) / (max_index - expected);
}

PricePath planted_pair_path(std::size_t n, const SynthConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double day_vol = std::hypot(config.factor_vol, config.idio_vol) / std::sqrt(21.0);
  double walk = 100.0;
  double noise = config.spread_vol / std::sqrt(1.0 - config.spread_phi * config.spread_phi) * normal(rng);
  PricePath p;
  p.a.reserve(n);
  p.b.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    walk *= std::exp(day_vol * normal(rng));
    noise = config.spread_phi * noise + config.spread_vol * normal(rng);
    p.b.push_back(walk);
    p.a.push_back(config.pair_beta * walk + config.pair_offset + noise);
  }
  return p;
}

PricePath independent_walks(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  PricePath p;
  double a = 0.0, b = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    a += normal(rng);
    b += normal(rng);
    p.a.push_back(a);
    p.b.push_back(b);
  }
  return p;
}

}  // namespace saefin
