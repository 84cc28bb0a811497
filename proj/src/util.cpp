#include <charconv>
#include <cmath>
#include <cstdlib>
#include <system_error>

#include <fmt/format.h>

#include "saefin/common.hpp"
#include "saefin/csv.hpp"
#include "saefin/date.hpp"
#include "saefin/parallel.hpp"

namespace saefin {

std::string make_doc_id(const CompanyId& company_id, int year) {
  return company_id + ":" + std::to_string(year);
}

DocKey parse_doc_id(const std::string& doc_id) {
  const auto colon = doc_id.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == doc_id.size()) {
    throw InputError("doc_id '" + doc_id + "' is not of the form <company_id>:<year>");
  }
  int year = 0;
  const char* first = doc_id.data() + colon + 1;
  const char* last = doc_id.data() + doc_id.size();
  auto [ptr, ec] = std::from_chars(first, last, year);
  if (ec != std::errc{} || ptr != last) {
    throw InputError("doc_id '" + doc_id + "' has a non-integer year");
  }
  return DocKey{doc_id.substr(0, colon), year};
}

std::size_t worker_count() {
  if (const char* env = std::getenv("SAEFIN_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- dates

Date make_date(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) {
    throw InputError(fmt::format("invalid date {:04d}-{:02d}-{:02d}", year, month, day));
  }
  return Date{ymd};
}

Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw InputError("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
  }
  auto parse_part = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + pos + len, v);
    if (ec != std::errc{} || ptr != text.data() + pos + len) {
      throw InputError("malformed date '" + std::string(text) + "'");
    }
    return v;
  };
  return make_date(parse_part(0, 4), static_cast<unsigned>(parse_part(5, 2)),
                   static_cast<unsigned>(parse_part(8, 2)));
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
}

int year_of(Date d) { return static_cast<int>(std::chrono::year_month_day{d}.year()); }

unsigned month_of(Date d) {
  return static_cast<unsigned>(std::chrono::year_month_day{d}.month());
}

bool is_weekday(Date d) {
  const std::chrono::weekday wd{d};
  return wd != std::chrono::Saturday && wd != std::chrono::Sunday;
}

// ---------------------------------------------------------------- csv

namespace csv {

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(line.substr(start));
      break;
    }
    out.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Reader::Reader(const std::filesystem::path& path, std::initializer_list<std::string_view> header)
    : path_(path), in_(path), width_(header.size()) {
  if (!in_) throw InputError("cannot open " + path.string());
  if (!std::getline(in_, line_)) throw InputError(path.string() + ": empty file, missing header");
  ++line_no_;
  if (!line_.empty() && line_.back() == '\r') line_.pop_back();
  const auto got = split(line_);
  bool ok = got.size() == header.size();
  if (ok) {
    std::size_t i = 0;
    for (auto h : header) ok = ok && got[i++] == h;
  }
  if (!ok) {
    std::string expected;
    for (auto h : header) expected += (expected.empty() ? "" : ",") + std::string(h);
    throw InputError(where("unexpected header '" + line_ + "', expected '" + expected + "'"));
  }
}

bool Reader::next() {
  while (std::getline(in_, line_)) {
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.empty()) continue;
    fields_ = split(line_);
    if (fields_.size() != width_) {
      throw InputError(where(fmt::format("expected {} fields, got {}", width_, fields_.size())));
    }
    return true;
  }
  return false;
}

long long Reader::as_int(std::size_t i) const {
  const auto& s = field(i);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError(where("field " + std::to_string(i + 1) + " '" + s + "' is not an integer"));
  }
  return v;
}

double Reader::as_double(std::size_t i) const {
  const auto& s = field(i);
  if (s == "nan" || s == "NaN") return std::nan("");
  if (s == "inf") return HUGE_VAL;
  if (s == "-inf") return -HUGE_VAL;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw InputError(where("field " + std::to_string(i + 1) + " '" + s + "' is not a number"));
  }
  return v;
}

std::string Reader::where(std::string_view msg) const {
  return fmt::format("{}:{}: {}", path_.string(), line_no_, msg);
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{}", v);
}

std::string fmt_double(double v, int precision) {
  if (!std::isfinite(v)) return fmt_double(v);
  return fmt::format("{:.{}g}", v, precision);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace csv
}  // namespace saefin
