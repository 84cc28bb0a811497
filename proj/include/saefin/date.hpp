#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace saefin {

using Date = std::chrono::sys_days;

/// Parses YYYY-MM-DD; throws InputError on malformed or invalid dates.
Date parse_date(std::string_view text);
std::string format_date(Date d);

Date make_date(int year, unsigned month, unsigned day);
int year_of(Date d);
unsigned month_of(Date d);
bool is_weekday(Date d);

/// Inclusive date range.
struct DateWindow {
  Date first;
  Date last;

  bool contains(Date d) const { return d >= first && d <= last; }
  int first_year() const { return year_of(first); }
  int last_year() const { return year_of(last); }
};

}  // namespace saefin
