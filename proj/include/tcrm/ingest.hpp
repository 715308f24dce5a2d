// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tcrm/error.hpp"
#include "tcrm/tgap_pfa.hpp"

namespace tcrm {

/// A dated source text (one address, one article).
struct RawDocument {
  std::string id;
  double timestamp = 0.0;
  std::string text;
};

struct IngestOptions {
  std::size_t min_count = 10;          // corpus-wide occurrences
  double tfidf_quantile = 0.15;        // keep this upper fraction of terms, 0 keeps all
  std::size_t paragraphs_per_document = 3;
};

struct IngestResult {
  Corpus corpus;
  std::vector<std::string> vocabulary;  // word id -> token
  std::size_t dropped_documents = 0;    // emptied by filtering
};

/// Lowercased runs of ASCII letters.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) {
      cur.push_back(static_cast<char>(std::tolower(u)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Blank-line separated paragraphs, whitespace-only paragraphs skipped.
inline std::vector<std::string> split_paragraphs(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  bool has_text = false;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    const bool blank = std::all_of(line.begin(), line.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
    if (blank) {
      if (has_text) out.push_back(std::move(cur));
      cur.clear();
      has_text = false;
    } else {
      if (!cur.empty()) cur.push_back('\n');
      cur.append(line);
      has_text = true;
    }
    pos = end + 1;
  }
  if (has_text) out.push_back(std::move(cur));
  return out;
}

/// Groups consecutive paragraphs into documents of `size` paragraphs (the
/// last chunk of a text may be shorter). Chunk ids are "<id>#<index>".
inline std::vector<RawDocument> chunk_paragraphs(std::span<const RawDocument> raw, std::size_t size) {
  if (size == 0) throw ParameterError("chunks need at least one paragraph");
  std::vector<RawDocument> out;
  for (const auto& doc : raw) {
    const auto paragraphs = split_paragraphs(doc.text);
    for (std::size_t i = 0, c = 0; i < paragraphs.size(); i += size, ++c) {
      RawDocument chunk{doc.id + "#" + std::to_string(c), doc.timestamp, {}};
      for (std::size_t j = i; j < std::min(i + size, paragraphs.size()); ++j) {
        if (j > i) chunk.text += "\n\n";
        chunk.text += paragraphs[j];
      }
      out.push_back(std::move(chunk));
    }
  }
  return out;
}

/// Raw text stream: each document starts with a header line
/// "@@ <timestamp> [id]"; everything up to the next header is its text.
/// Missing ids become "doc<index>".
inline std::vector<RawDocument> read_raw_documents(std::istream& in) {
  std::vector<RawDocument> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.rfind("@@", 0) == 0) {
      std::istringstream hs(line.substr(2));
      RawDocument d;
      if (!(hs >> d.timestamp)) throw FormatError("line " + std::to_string(lineno) + ": header needs a timestamp");
      if (!(hs >> d.id)) d.id = "doc" + std::to_string(out.size());
      out.push_back(std::move(d));
    } else if (out.empty()) {
      if (!tokenize(line).empty()) throw FormatError("text before the first '@@' header");
    } else {
      out.back().text += line;
      out.back().text.push_back('\n');
    }
  }
  return out;
}

/// Per-term score: max over documents of tf * log(N / df).
inline std::map<std::string, double> tfidf_scores(const std::vector<std::map<std::string, std::uint32_t>>& docs) {
  std::map<std::string, std::size_t> df;
  for (const auto& d : docs) {
    for (const auto& [w, c] : d) ++df[w];
  }
  const double N = static_cast<double>(docs.size());
  std::map<std::string, double> score;
  for (const auto& d : docs) {
    for (const auto& [w, c] : d) {
      const double s = c * std::log(N / static_cast<double>(df[w]));
      auto [it, fresh] = score.emplace(w, s);
      if (!fresh) it->second = std::max(it->second, s);
    }
  }
  return score;
}

/// Chunk, tokenize and filter into a sparse corpus. Vocabulary is sorted
/// lexicographically; documents keep input order.
inline IngestResult ingest(std::span<const RawDocument> raw, const IngestOptions& opt = {}) {
  if (raw.empty()) throw UsageError("nothing to ingest");
  if (!(opt.tfidf_quantile >= 0.0 && opt.tfidf_quantile <= 1.0)) {
    throw ParameterError("tfidf quantile must lie in [0, 1]");
  }
  const auto chunks = chunk_paragraphs(raw, opt.paragraphs_per_document);
  std::vector<std::map<std::string, std::uint32_t>> bags(chunks.size());
  std::map<std::string, std::uint64_t> totals;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    for (auto& tok : tokenize(chunks[i].text)) {
      ++bags[i][tok];
      ++totals[tok];
    }
  }

  std::map<std::string, bool> keep;
  for (const auto& [w, c] : totals) keep[w] = c >= opt.min_count;
  if (opt.tfidf_quantile > 0.0 && !totals.empty()) {
    const auto scores = tfidf_scores(bags);
    std::vector<double> sorted;
    for (const auto& [w, s] : scores) sorted.push_back(s);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto n_keep = static_cast<std::size_t>(std::ceil(opt.tfidf_quantile * static_cast<double>(sorted.size())));
    const double cut = n_keep == 0 ? std::numeric_limits<double>::infinity() : sorted[n_keep - 1];
    for (const auto& [w, s] : scores) {
      if (s < cut) keep[w] = false;
    }
  }

  IngestResult out;
  std::map<std::string, std::uint32_t> ids;
  for (const auto& [w, k] : keep) {
    if (!k) continue;
    ids.emplace(w, static_cast<std::uint32_t>(out.vocabulary.size()));
    out.vocabulary.push_back(w);
  }
  if (out.vocabulary.empty()) throw ParameterError("vocabulary is empty after filtering");

  std::vector<double> ts;
  for (const auto& c : chunks) ts.push_back(c.timestamp);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  out.corpus.vocabulary_size = out.vocabulary.size();
  out.corpus.timestamps = ts;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    Document d{chunks[i].id,
               static_cast<std::size_t>(std::lower_bound(ts.begin(), ts.end(), chunks[i].timestamp) - ts.begin()),
               {}};
    for (const auto& [w, c] : bags[i]) {
      if (auto it = ids.find(w); it != ids.end()) d.words.push_back({it->second, c});
    }
    std::sort(d.words.begin(), d.words.end(), [](const WordCount& a, const WordCount& b) { return a.word < b.word; });
    if (d.words.empty()) {
      ++out.dropped_documents;
    } else {
      out.corpus.documents.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace tcrm
