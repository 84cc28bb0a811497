#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace saefin {

using CompanyId = std::string;
using FeatureId = std::uint32_t;

/// Base class for all errors raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (fatal for the current load).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A quantity is mathematically undefined for the given data
/// (zero variance, zero-norm vector, singular design).
class UndefinedError : public Error {
 public:
  using Error::Error;
};

/// Identifies a document as (company, year); encoded as "<company_id>:<year>".
struct DocKey {
  CompanyId company_id;
  int year = 0;

  friend bool operator==(const DocKey&, const DocKey&) = default;
  friend auto operator<=>(const DocKey&, const DocKey&) = default;
};

std::string make_doc_id(const CompanyId& company_id, int year);

/// Throws InputError when the id has no ':<year>' suffix.
DocKey parse_doc_id(const std::string& doc_id);

}  // namespace saefin
