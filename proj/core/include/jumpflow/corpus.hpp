#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "jumpflow/classical.hpp"
#include "jumpflow/events.hpp"

namespace jumpflow {

inline constexpr int kCorpusFormatVersion = 1;

/// JSON-lines corpus. The first line is the header
///
///   {"format_version":1,"marks":{...},"window":[t0,tN],"spec":{...},"count":n}
///
/// ("spec" optional, the generating process), followed by one
/// {"events":[[t, mark], ...]} record per sequence where mark is an integer
/// type or an array of reals. A record may carry its own "window".
/// Doubles are written in shortest round-trip form, so reading back is exact.
struct Corpus {
  MarkSpace marks = MarkSpace::discrete(1);
  double t_start = 0.0;
  double t_end = 0.0;
  std::optional<ClassicalProcessSpec> spec;
  std::vector<EventSequence> sequences;
  std::size_t separated_ties = 0;  // events nudged off an equal timestamp on read
};

void write_corpus(std::ostream& out, const Corpus& corpus);
/// Writes to a temporary sibling file and renames it into place.
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Throws SchemaError on malformed records, sequences outside the window,
/// unsorted timestamps or marks outside the mark space.
Corpus read_corpus(std::istream& in);
Corpus read_corpus(const std::filesystem::path& path);

/// Writes `text` to a temporary sibling of `path` and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace jumpflow
