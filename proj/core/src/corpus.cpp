#include "jumpflow/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>

#include "json_codec.hpp"

namespace jumpflow {

using detail::json;

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot move " + tmp.string() + " to " + path.string() + ": " +
                             ec.message());
  }
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  json header = {{"format_version", kCorpusFormatVersion},
                 {"marks", detail::marks_to_json(corpus.marks)},
                 {"window", {corpus.t_start, corpus.t_end}},
                 {"count", corpus.sequences.size()}};
  if (corpus.spec) header["spec"] = detail::spec_to_json(*corpus.spec);
  out << header.dump() << '\n';
  for (const EventSequence& seq : corpus.sequences) {
    json events = json::array();
    for (const Event& e : seq.events) {
      if (corpus.marks.is_discrete()) {
        events.push_back({e.time, e.mark.type});
      } else {
        events.push_back({e.time, e.mark.features});
      }
    }
    json record = {{"events", std::move(events)}};
    if (seq.t_start != corpus.t_start || seq.t_end != corpus.t_end) {
      record["window"] = {seq.t_start, seq.t_end};
    }
    out << record.dump() << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ostringstream os;
  write_corpus(os, corpus);
  write_file_atomic(path, os.str());
}

namespace {

std::pair<double, double> parse_window(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw SchemaError(where + ": window must be [t0, tN]");
  }
  const double a = j[0].get<double>(), b = j[1].get<double>();
  if (!(a <= b)) throw SchemaError(where + ": window is reversed");
  return {a, b};
}

Mark parse_mark(const json& j, const MarkSpace& marks, const std::string& where) {
  Mark mark;
  if (marks.is_discrete()) {
    if (!j.is_number_integer() || j.get<long long>() < 0) {
      throw SchemaError(where + ": discrete mark must be a non-negative integer");
    }
    mark.type = j.get<std::size_t>();
  } else {
    if (!j.is_array()) throw SchemaError(where + ": continuous mark must be an array");
    for (const auto& x : j) {
      if (!x.is_number()) throw SchemaError(where + ": mark features must be numbers");
      mark.features.push_back(x.get<double>());
    }
  }
  return mark;
}

}  // namespace

Corpus read_corpus(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  auto parse = [&](const std::string& text) {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw SchemaError("line " + std::to_string(line_no) + ": invalid JSON: " + e.what());
    }
  };

  if (!next_line()) throw SchemaError("corpus is empty: missing header record");
  const json header = parse(line);
  const int version = detail::field<int>(header, "format_version", "corpus header");
  if (version != kCorpusFormatVersion) {
    throw SchemaError("unsupported corpus format_version " + std::to_string(version));
  }
  Corpus corpus;
  corpus.marks = detail::marks_from_json(detail::field<json>(header, "marks", "corpus header"));
  std::tie(corpus.t_start, corpus.t_end) =
      parse_window(detail::field<json>(header, "window", "corpus header"), "corpus header");
  if (header.contains("spec")) corpus.spec = detail::spec_from_json(header["spec"]);

  while (next_line()) {
    const std::string where = "line " + std::to_string(line_no);
    const json record = parse(line);
    const json events = detail::field<json>(record, "events", where);
    if (!events.is_array()) throw SchemaError(where + ": events must be an array");
    EventSequence seq;
    seq.t_start = corpus.t_start;
    seq.t_end = corpus.t_end;
    if (record.contains("window")) {
      std::tie(seq.t_start, seq.t_end) = parse_window(record["window"], where);
    }
    for (const auto& e : events) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number()) {
        throw SchemaError(where + ": each event must be [time, mark]");
      }
      seq.events.push_back(Event{e[0].get<double>(), parse_mark(e[1], corpus.marks, where)});
    }
    // Equal timestamps are nudged apart; genuinely unsorted input is still
    // rejected by validation below.
    const auto by_time = [](const Event& a, const Event& b) { return a.time < b.time; };
    if (std::is_sorted(seq.events.begin(), seq.events.end(), by_time)) {
      corpus.separated_ties += separate_ties(seq);
    }
    try {
      validate_sequence(seq, corpus.marks);
    } catch (const SchemaError& err) {
      throw SchemaError(where + ": " + err.what());
    }
    corpus.sequences.push_back(std::move(seq));
  }
  if (header.contains("count")) {
    const auto count = detail::field<std::size_t>(header, "count", "corpus header");
    if (count != corpus.sequences.size()) {
      throw SchemaError("corpus header announces " + std::to_string(count) +
                        " sequences, found " + std::to_string(corpus.sequences.size()));
    }
  }
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus " + path.string());
  return read_corpus(in);
}

}  // namespace jumpflow
