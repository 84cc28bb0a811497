#include "saefin/sparsefeat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include <fmt/format.h>

#include "saefin/csv.hpp"

namespace saefin {

void FeatureSpace::validate() const {
  if (dim == 0) throw InputError("feature dim must be positive");
  if (k_active == 0) throw InputError("k_active must be positive");
  if (dim > std::numeric_limits<FeatureId>::max()) throw InputError("feature dim too large");
}

SummedFeatureVector::SummedFeatureVector(std::string doc_id, std::size_t dim)
    : doc_id_(std::move(doc_id)), dim_(dim) {}

SummedFeatureVector::SummedFeatureVector(std::string doc_id, std::size_t dim,
                                         std::vector<FeatureActivation> entries)
    : doc_id_(std::move(doc_id)), dim_(dim), entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return a.feature < b.feature; });
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.feature >= dim_) {
      throw InputError(fmt::format("{}: feature_id {} >= dim {}", doc_id_, e.feature, dim_));
    }
    if (!(e.activation > 0.0) || !std::isfinite(e.activation)) {
      throw InputError(fmt::format("{}: feature {} has non-positive summed activation {}",
                                   doc_id_, e.feature, e.activation));
    }
    if (i > 0 && entries_[i - 1].feature == e.feature) {
      throw InputError(fmt::format("{}: duplicate feature_id {}", doc_id_, e.feature));
    }
  }
}

double SummedFeatureVector::value(FeatureId f) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), f,
                             [](const FeatureActivation& e, FeatureId id) { return e.feature < id; });
  return (it != entries_.end() && it->feature == f) ? it->activation : 0.0;
}

SummedFeatureVector sum_token_features(std::span<const TokenFeatureActivations> tokens,
                                       const FeatureSpace& space) {
  space.validate();
  if (tokens.empty()) return SummedFeatureVector{};
  const std::string& doc = tokens.front().doc_id;
  std::vector<FeatureActivation> all;
  for (const auto& tok : tokens) {
    if (tok.doc_id != doc) {
      throw InputError("sum_token_features: mixed doc_ids '" + doc + "' and '" + tok.doc_id + "'");
    }
    for (const auto& e : tok.entries) {
      if (e.feature >= space.dim) {
        throw InputError(fmt::format("{}: feature_id {} >= dim {}", doc, e.feature, space.dim));
      }
      all.push_back(e);
    }
  }
  // Stable sort keeps token order within a feature, so the floating-point
  // accumulation order is fixed for a given input.
  std::stable_sort(all.begin(), all.end(),
                   [](const auto& a, const auto& b) { return a.feature < b.feature; });
  std::vector<FeatureActivation> merged;
  for (const auto& e : all) {
    if (!merged.empty() && merged.back().feature == e.feature) {
      merged.back().activation += e.activation;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const FeatureActivation& e) { return !(e.activation > 0.0); });
  return SummedFeatureVector(doc, space.dim, std::move(merged));
}

std::vector<SummedFeatureVector> sum_documents(std::span<const TokenFeatureActivations> tokens,
                                               const FeatureSpace& space) {
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::vector<TokenFeatureActivations>> groups;
  for (const auto& tok : tokens) {
    auto [it, inserted] = index.try_emplace(tok.doc_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(tok);
  }
  std::vector<SummedFeatureVector> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(sum_token_features(g, space));
  return out;
}

std::vector<HistogramBin> activation_histogram(std::span<const SummedFeatureVector> vectors,
                                               double bin_width, double clip_max) {
  if (!(bin_width > 0.0)) throw InputError("histogram bin_width must be positive");
  if (!(clip_max > 0.0)) throw InputError("histogram clip_max must be positive");
  const auto regular = static_cast<std::size_t>(std::ceil(clip_max / bin_width - 1e-9));
  std::vector<HistogramBin> bins(regular + 1);
  for (std::size_t b = 0; b < regular; ++b) {
    bins[b].lo = static_cast<double>(b) * bin_width;
    bins[b].hi = std::min(clip_max, static_cast<double>(b + 1) * bin_width);
  }
  bins[regular].lo = clip_max;
  bins[regular].hi = std::numeric_limits<double>::infinity();
  for (const auto& v : vectors) {
    for (const auto& e : v.entries()) {
      std::size_t b = regular;
      if (e.activation < clip_max) {
        b = std::min(regular - 1, static_cast<std::size_t>(e.activation / bin_width));
      }
      ++bins[b].count;
    }
  }
  return bins;
}

void write_histogram(std::ostream& out, std::span<const HistogramBin> bins) {
  out << "bin_lo,bin_hi,count\n";
  for (const auto& b : bins) {
    out << csv::fmt_double(b.lo) << ',' << csv::fmt_double(b.hi) << ',' << b.count << '\n';
  }
}

std::vector<TokenFeatureActivations> load_token_activations(const std::filesystem::path& path,
                                                            const FeatureSpace& space) {
  space.validate();
  csv::Reader r(path, {"doc_id", "token_index", "feature_id", "activation"});
  std::map<std::pair<std::string, std::uint32_t>, std::size_t> index;
  std::vector<TokenFeatureActivations> out;
  while (r.next()) {
    const auto token = r.as_int(1);
    const auto feature = r.as_int(2);
    const double act = r.as_double(3);
    if (token < 0) throw InputError(r.where("negative token_index"));
    if (feature < 0 || static_cast<std::size_t>(feature) >= space.dim) {
      throw InputError(r.where(fmt::format("feature_id {} outside [0, {})", feature, space.dim)));
    }
    if (!std::isfinite(act) || act < 0.0) {
      throw InputError(r.where(fmt::format("activation {} must be finite and non-negative", act)));
    }
    const auto key = std::make_pair(r.field(0), static_cast<std::uint32_t>(token));
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) out.push_back(TokenFeatureActivations{key.first, key.second, {}});
    auto& rec = out[it->second];
    const auto fid = static_cast<FeatureId>(feature);
    for (const auto& e : rec.entries) {
      if (e.feature == fid) {
        throw InputError(r.where(fmt::format("feature_id {} repeated within token", fid)));
      }
    }
    if (act == 0.0) continue;
    rec.entries.push_back({fid, act});
    if (rec.entries.size() > space.k_active) {
      throw InputError(
          r.where(fmt::format("token has more than k_active={} active features", space.k_active)));
    }
  }
  return out;
}

void write_token_activations(std::ostream& out, std::span<const TokenFeatureActivations> tokens) {
  out << "doc_id,token_index,feature_id,activation\n";
  for (const auto& t : tokens) {
    for (const auto& e : t.entries) {
      out << t.doc_id << ',' << t.token_index << ',' << e.feature << ','
          << csv::fmt_double(e.activation) << '\n';
    }
  }
}

std::vector<SummedFeatureVector> load_summed_features(const std::filesystem::path& path,
                                                      const FeatureSpace& space) {
  space.validate();
  csv::Reader r(path, {"doc_id", "feature_id", "summed_activation"});
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::string> docs;
  std::vector<std::vector<FeatureActivation>> entries;
  while (r.next()) {
    const auto feature = r.as_int(1);
    const double act = r.as_double(2);
    if (feature < 0 || static_cast<std::size_t>(feature) >= space.dim) {
      throw InputError(r.where(fmt::format("feature_id {} outside [0, {})", feature, space.dim)));
    }
    if (!std::isfinite(act) || act < 0.0) {
      throw InputError(r.where(fmt::format("summed activation {} must be finite and non-negative", act)));
    }
    auto [it, inserted] = index.try_emplace(r.field(0), docs.size());
    if (inserted) {
      docs.push_back(r.field(0));
      entries.emplace_back();
    }
    if (act > 0.0) entries[it->second].push_back({static_cast<FeatureId>(feature), act});
  }
  std::vector<SummedFeatureVector> out;
  out.reserve(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    out.emplace_back(docs[i], space.dim, std::move(entries[i]));
  }
  return out;
}

void write_summed_features(std::ostream& out, std::span<const SummedFeatureVector> vectors) {
  out << "doc_id,feature_id,summed_activation\n";
  for (const auto& v : vectors) {
    for (const auto& e : v.entries()) {
      out << v.doc_id() << ',' << e.feature << ',' << csv::fmt_double(e.activation) << '\n';
    }
  }
}

}  // namespace saefin
