// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tcrm/error.hpp"
#include "tcrm/lfm.hpp"
#include "tcrm/tgap_pfa.hpp"

namespace tcrm {

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t end = line.find('\t', pos);
    out.push_back(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void bad_line(std::size_t lineno, const std::string& what) {
  throw FormatError("line " + std::to_string(lineno) + ": " + what);
}

inline double parse_double(std::string_view s, std::size_t lineno) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_line(lineno, "not a number: '" + std::string(s) + "'");
  return v;
}

template <class Int>
Int parse_integer(std::string_view s, std::size_t lineno) {
  Int v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) bad_line(lineno, "not an integer: '" + std::string(s) + "'");
  return v;
}

inline bool is_missing(std::string_view s) { return s == "NA" || s == "nan" || s == "NaN" || s.empty(); }

}  // namespace detail

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[32];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// ---------------------------------------------------------------------------
// Files

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw FormatError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// LFM data: rows "t <tab> y_1 ... y_d"; NA marks a missing entry

inline LfmData read_lfm_tsv(std::istream& in) {
  std::vector<double> t;
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<double>> mask;
  std::string line;
  std::size_t lineno = 0, d = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto sv = detail::strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto f = detail::split_tabs(sv);
    if (f.size() < 2) detail::bad_line(lineno, "need a covariate and at least one value");
    if (d == 0) d = f.size() - 1;
    if (f.size() - 1 != d) detail::bad_line(lineno, "expected " + std::to_string(d) + " values");
    t.push_back(detail::parse_double(f[0], lineno));
    rows.emplace_back(d, 0.0);
    mask.emplace_back(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (detail::is_missing(f[j + 1])) {
        mask.back()[j] = 0.0;
      } else {
        rows.back()[j] = detail::parse_double(f[j + 1], lineno);
      }
    }
  }
  LfmData data;
  data.grid = t;
  std::sort(data.grid.begin(), data.grid.end());
  data.grid.erase(std::unique(data.grid.begin(), data.grid.end()), data.grid.end());
  data.y.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  data.observed.resize(data.y.rows(), data.y.cols());
  for (std::size_t n = 0; n < rows.size(); ++n) {
    data.point_covariate.push_back(
        static_cast<std::size_t>(std::lower_bound(data.grid.begin(), data.grid.end(), t[n]) - data.grid.begin()));
    for (std::size_t j = 0; j < d; ++j) {
      data.y(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = rows[n][j];
      data.observed(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j)) = mask[n][j];
    }
  }
  return data;
}

inline void write_lfm_tsv(std::ostream& out, const LfmData& data) {
  data.validate();
  for (std::size_t n = 0; n < data.size(); ++n) {
    out << format_double(data.grid[data.point_covariate[n]]);
    for (Eigen::Index j = 0; j < data.y.cols(); ++j) {
      const auto nn = static_cast<Eigen::Index>(n);
      out << '\t' << (data.observed(nn, j) > 0.0 ? format_double(data.y(nn, j)) : std::string("NA"));
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Corpus: rows "doc_id <tab> timestamp <tab> token_id <tab> count"

/// Documents appear in order of first occurrence. A document listed with
/// no tokens cannot be represented. `vocabulary_size` 0 means one past the
/// largest id seen.
inline Corpus read_corpus_tsv(std::istream& in, std::size_t vocabulary_size = 0) {
  struct Pending {
    double timestamp;
    std::map<std::uint32_t, std::uint32_t> words;
  };
  std::vector<std::string> order;
  std::map<std::string, Pending> docs;
  std::string line;
  std::size_t lineno = 0;
  std::uint32_t max_word = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto sv = detail::strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto f = detail::split_tabs(sv);
    if (f.size() != 4) detail::bad_line(lineno, "expected 4 tab-separated fields");
    const std::string id(f[0]);
    const double ts = detail::parse_double(f[1], lineno);
    const auto word = detail::parse_integer<std::uint32_t>(f[2], lineno);
    const auto count = detail::parse_integer<std::uint32_t>(f[3], lineno);
    auto [it, fresh] = docs.emplace(id, Pending{ts, {}});
    if (fresh) order.push_back(id);
    if (it->second.timestamp != ts) detail::bad_line(lineno, "document '" + id + "' has two timestamps");
    if (count == 0) continue;
    it->second.words[word] += count;
    max_word = std::max(max_word, word);
  }
  Corpus c;
  c.vocabulary_size = vocabulary_size ? vocabulary_size : static_cast<std::size_t>(max_word) + 1;
  for (const auto& [id, p] : docs) c.timestamps.push_back(p.timestamp);
  std::sort(c.timestamps.begin(), c.timestamps.end());
  c.timestamps.erase(std::unique(c.timestamps.begin(), c.timestamps.end()), c.timestamps.end());
  for (const auto& id : order) {
    const auto& p = docs.at(id);
    Document d{id,
               static_cast<std::size_t>(std::lower_bound(c.timestamps.begin(), c.timestamps.end(), p.timestamp) -
                                        c.timestamps.begin()),
               {}};
    for (const auto& [w, n] : p.words) d.words.push_back({w, n});
    c.documents.push_back(std::move(d));
  }
  c.validate();
  return c;
}

inline void write_corpus_tsv(std::ostream& out, const Corpus& c) {
  for (const auto& d : c.documents) {
    for (const auto& w : d.words) {
      out << d.id << '\t' << format_double(c.timestamps[d.timestamp]) << '\t' << w.word << '\t' << w.count << '\n';
    }
  }
}

/// One token per line; line number is the id.
inline std::vector<std::string> read_vocabulary(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) out.emplace_back(detail::strip_cr(line));
  while (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

inline void write_vocabulary(std::ostream& out, const std::vector<std::string>& vocab) {
  for (const auto& w : vocab) out << w << '\n';
}

// ---------------------------------------------------------------------------
// Trace

/// Per-sweep CSV "iteration,active,log_likelihood", flushed every row so a
/// run that dies keeps what it wrote.
class TraceWriter {
 public:
  explicit TraceWriter(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw FormatError("cannot open " + path.string());
    out_ << "iteration,active,log_likelihood\n";
    out_.flush();
  }

  void row(std::size_t iteration, std::size_t active, double log_likelihood) {
    out_ << iteration << ',' << active << ',' << format_double(log_likelihood) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

}  // namespace tcrm
