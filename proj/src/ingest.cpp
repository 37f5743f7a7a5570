#include "volsynth/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "volsynth/error.hpp"
#include "volsynth/text.hpp"

namespace volsynth::ingest {

FeatureFrame::FeatureFrame(std::vector<Date> dates, std::string target_column)
    : dates_(std::move(dates)), target_(std::move(target_column)) {
  for (std::size_t i = 1; i < dates_.size(); ++i) {
    if (dates_[i] - dates_[i - 1] != 1) {
      throw Error(ErrorCode::kDateGap, "dates must advance by exactly one day at " + dates_[i].iso());
    }
  }
}

const Column& FeatureFrame::column(const std::string& name) const {
  auto it = columns_.find(name);
  if (it == columns_.end()) throw Error(ErrorCode::kConfig, "unknown column '" + name + "'");
  return it->second;
}

std::vector<double> FeatureFrame::values(const std::string& name) const {
  const Column& col = column(name);
  std::vector<double> out;
  out.reserve(col.size());
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (!col[i]) {
      throw Error(ErrorCode::kMalformedInput,
                  "column '" + name + "' is missing a value at " + dates_[i].iso());
    }
    out.push_back(*col[i]);
  }
  return out;
}

void FeatureFrame::set_column(const std::string& name, Column column) {
  if (column.size() != dates_.size()) {
    throw Error(ErrorCode::kLengthMismatch, "column '" + name + "' has " +
                                                std::to_string(column.size()) + " cells, expected " +
                                                std::to_string(dates_.size()));
  }
  if (columns_.count(name) == 0) names_.push_back(name);
  columns_[name] = std::move(column);
}

void FeatureFrame::set_column(const std::string& name, const std::vector<double>& values) {
  set_column(name, Column(values.begin(), values.end()));
}

void FeatureFrame::drop_column(const std::string& name) {
  if (columns_.erase(name) == 0) return;
  names_.erase(std::find(names_.begin(), names_.end(), name));
}

std::optional<std::size_t> FeatureFrame::row_of(Date d) const {
  if (dates_.empty() || d < dates_.front() || d > dates_.back()) return std::nullopt;
  return static_cast<std::size_t>(d - dates_.front());
}

FeatureFrame FeatureFrame::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, rows());
  begin = std::min(begin, end);
  FeatureFrame out(std::vector<Date>(dates_.begin() + begin, dates_.begin() + end), target_);
  for (const auto& name : names_) {
    const Column& col = columns_.at(name);
    out.set_column(name, Column(col.begin() + begin, col.begin() + end));
  }
  return out;
}

bool FeatureFrame::has_missing(const std::string& name) const {
  const Column& col = column(name);
  return std::any_of(col.begin(), col.end(), [](const Cell& c) { return !c.has_value(); });
}

FeatureFrame parse_dataset(std::istream& in, const std::string& target_column,
                           const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kMissingDateColumn, origin + ": empty file, no header row");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  for (auto field : text::split(line, ',')) header.emplace_back(text::trim(field));

  auto date_it = std::find(header.begin(), header.end(), "date");
  if (date_it == header.end()) {
    throw Error(ErrorCode::kMissingDateColumn, origin + ": no 'date' column in header");
  }
  const std::size_t date_idx = static_cast<std::size_t>(date_it - header.begin());

  std::vector<Date> dates;
  std::vector<Column> cols(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    auto fields = text::split(line, ',');
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::kMalformedInput, origin + ":" + std::to_string(line_no) + ": expected " +
                                                  std::to_string(header.size()) + " fields, got " +
                                                  std::to_string(fields.size()));
    }
    auto date = Date::parse(text::trim(fields[date_idx]));
    if (!date) {
      throw Error(ErrorCode::kMalformedInput,
                  origin + ":" + std::to_string(line_no) + ": bad date '" +
                      std::string(fields[date_idx]) + "'");
    }
    if (!dates.empty()) {
      if (*date == dates.back()) {
        throw Error(ErrorCode::kDuplicateDate, origin + ": duplicate date " + date->iso());
      }
      if (*date < dates.back()) {
        throw Error(ErrorCode::kNonMonotoneDate,
                    origin + ": date " + date->iso() + " follows " + dates.back().iso());
      }
    }
    dates.push_back(*date);
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == date_idx) continue;
      cols[c].push_back(text::parse_double(fields[c]));
    }
  }

  FeatureFrame frame(std::move(dates), target_column);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == date_idx) continue;
    frame.set_column(header[c], std::move(cols[c]));
  }
  return frame;
}

FeatureFrame load_dataset(const std::filesystem::path& path, const std::string& target_column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open dataset " + path.string());
  return parse_dataset(in, target_column, path.string());
}

void write_csv(const FeatureFrame& frame, std::ostream& out) {
  out << "date";
  for (const auto& name : frame.column_names()) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    out << frame.dates()[r].iso();
    for (const auto& name : frame.column_names()) {
      out << ',';
      const Cell& cell = frame.column(name)[r];
      if (cell) out << text::format_double(*cell);
    }
    out << '\n';
  }
}

void save_dataset(const FeatureFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  write_csv(frame, out);
}

FeatureFrame fill_missing(const FeatureFrame& frame, const FillPolicy& policy) {
  for (const auto& name : policy.backfill_columns) {
    if (policy.zero_columns.count(name)) {
      throw Error(ErrorCode::kFillPolicy, "column '" + name + "' is in both fill sets");
    }
  }

  FeatureFrame out = frame;
  for (const auto& name : frame.column_names()) {
    if (!frame.has_missing(name)) continue;
    Column col = frame.column(name);
    if (policy.zero_columns.count(name)) {
      for (auto& cell : col) {
        if (!cell) cell = 0.0;
      }
    } else if (policy.backfill_columns.count(name)) {
      auto first = std::find_if(col.begin(), col.end(), [](const Cell& c) { return c.has_value(); });
      if (first == col.end()) {
        throw Error(ErrorCode::kAllMissing, "column '" + name + "' has no values to backfill from");
      }
      const double seed = **first;
      Cell last = seed;
      for (auto& cell : col) {
        if (cell) {
          last = cell;
        } else {
          cell = last;
        }
      }
    } else {
      throw Error(ErrorCode::kFillPolicy,
                  "column '" + name + "' has missing values but no fill policy");
    }
    out.set_column(name, std::move(col));
  }
  return out;
}

Splits split_by_date(const FeatureFrame& frame, const SplitBoundaries& b) {
  if (frame.rows() == 0) throw Error(ErrorCode::kBoundary, "cannot split an empty frame");
  if (!(b.train_end < b.val_end && b.val_end < b.test_end)) {
    throw Error(ErrorCode::kBoundary, "split boundaries must satisfy train_end < val_end < test_end");
  }
  auto train_row = frame.row_of(b.train_end);
  auto val_row = frame.row_of(b.val_end);
  auto test_row = frame.row_of(b.test_end);
  if (!train_row || !val_row || !test_row) {
    throw Error(ErrorCode::kBoundary, "split boundary outside the frame's range " +
                                          frame.dates().front().iso() + ".." +
                                          frame.dates().back().iso());
  }
  return Splits{frame.slice(0, *train_row + 1), frame.slice(*train_row + 1, *val_row + 1),
                frame.slice(*val_row + 1, *test_row + 1)};
}

FeatureFrame merge_columns(const FeatureFrame& base, const FeatureFrame& extra) {
  FeatureFrame out = base;
  for (const auto& name : extra.column_names()) {
    Column col(base.rows());
    const Column& src = extra.column(name);
    for (std::size_t r = 0; r < base.rows(); ++r) {
      if (auto row = extra.row_of(base.dates()[r])) col[r] = src[*row];
    }
    out.set_column(name, std::move(col));
  }
  return out;
}

}  // namespace volsynth::ingest
