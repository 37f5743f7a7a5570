#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "volsynth/date.hpp"

namespace volsynth::ingest {

// A cell without a value. Zero is a meaningful flow value, so missing data is
// never encoded as a number.
using Cell = std::optional<double>;
using Column = std::vector<Cell>;

// Date-indexed table of named real-valued columns. Dates are gap-free and
// strictly increasing by one day; every column has one cell per date.
class FeatureFrame {
 public:
  FeatureFrame() = default;
  explicit FeatureFrame(std::vector<Date> dates, std::string target_column = {});

  const std::vector<Date>& dates() const { return dates_; }
  std::size_t rows() const { return dates_.size(); }
  const std::vector<std::string>& column_names() const { return names_; }
  const std::string& target_column() const { return target_; }
  void set_target_column(std::string name) { target_ = std::move(name); }

  bool has_column(const std::string& name) const { return columns_.count(name) != 0; }
  const Column& column(const std::string& name) const;
  // Dense view of a column; throws if any cell is missing.
  std::vector<double> values(const std::string& name) const;

  // Adds a new column or replaces an existing one in place.
  void set_column(const std::string& name, Column column);
  void set_column(const std::string& name, const std::vector<double>& values);
  void drop_column(const std::string& name);

  std::optional<std::size_t> row_of(Date d) const;
  // Rows [begin, end).
  FeatureFrame slice(std::size_t begin, std::size_t end) const;

  bool has_missing(const std::string& name) const;

  friend bool operator==(const FeatureFrame&, const FeatureFrame&) = default;

 private:
  std::vector<Date> dates_;
  std::vector<std::string> names_;
  std::map<std::string, Column> columns_;
  std::string target_;
};

struct SplitBoundaries {
  Date train_end;
  Date val_end;
  Date test_end;
};

struct FillPolicy {
  std::set<std::string> backfill_columns;
  std::set<std::string> zero_columns;
};

struct Splits {
  FeatureFrame train;
  FeatureFrame validation;
  FeatureFrame test;
};

FeatureFrame load_dataset(const std::filesystem::path& path, const std::string& target_column);
FeatureFrame parse_dataset(std::istream& in, const std::string& target_column,
                           const std::string& origin = "<stream>");

// Shortest round-trip formatting; missing cells are written as empty fields.
void write_csv(const FeatureFrame& frame, std::ostream& out);
void save_dataset(const FeatureFrame& frame, const std::filesystem::path& path);

FeatureFrame fill_missing(const FeatureFrame& frame, const FillPolicy& policy);

Splits split_by_date(const FeatureFrame& frame, const SplitBoundaries& bounds);

// Joins `extra` columns onto `base` by date. Dates of `base` absent from
// `extra` get missing cells.
FeatureFrame merge_columns(const FeatureFrame& base, const FeatureFrame& extra);

}  // namespace volsynth::ingest
