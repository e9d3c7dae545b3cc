#pragma once

// SVC-format signature records, dataset layout on disk, and the
// enrollment/probe pairing protocol used for training and evaluation.

#include "sigver/common.hpp"

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <tuple>
#include <vector>

namespace sigver {

inline constexpr int kMaxPressure = 1023;
/// Pressure assigned to every sample of a file without a pressure column.
inline constexpr int kDefaultPressure = 512;

enum class SignatureKind { Genuine, SkilledForgery };

inline std::string_view kind_name(SignatureKind kind) {
  return kind == SignatureKind::Genuine ? "genuine" : "forgery";
}

struct PenSample {
  std::int64_t x = 0;
  std::int64_t y = 0;
  int pressure = 0;
  std::int64_t timestamp = 0;  // milliseconds
  bool pen_down = true;

  bool operator==(const PenSample&) const = default;
};

struct SignatureRecord {
  std::vector<PenSample> samples;
  std::string user_id;
  int session = 1;
  SignatureKind kind = SignatureKind::Genuine;
  int sample_index = 0;
  /// False when the source file carried no pressure column.
  bool has_pressure = true;

  bool operator==(const SignatureRecord&) const = default;

  /// Stable identity string, e.g. "u0007/genuine_2_3".
  std::string ref() const {
    return user_id + "/" + std::string(kind_name(kind)) + "_" + std::to_string(session) + "_" +
           std::to_string(sample_index);
  }
};

inline void validate(const SignatureRecord& record) {
  if (record.samples.size() < 2) {
    throw Error(record.ref() + ": a signature needs at least 2 samples");
  }
  for (std::size_t i = 0; i < record.samples.size(); ++i) {
    const auto& s = record.samples[i];
    if (s.pressure < 0 || s.pressure > kMaxPressure) {
      throw Error(record.ref() + ": pressure out of range at sample " + std::to_string(i));
    }
    if (i > 0 && s.timestamp < record.samples[i - 1].timestamp) {
      throw Error(record.ref() + ": decreasing timestamp at sample " + std::to_string(i));
    }
  }
}

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::int64_t to_int(std::string_view token, std::size_t line_no) {
  std::int64_t value = 0;
  const auto* first = token.data();
  const auto* last = token.data() + token.size();
  if (!token.empty() && token.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line_no, "non-numeric token '" + std::string(token) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  // A terminating newline does not start another line.
  if (!lines.empty() && lines.back().empty() && !text.empty() && text.back() == '\n') lines.pop_back();
  return lines;
}

}  // namespace detail

/// Parses one SVC file: a sample-count header line, then one sample per line
/// as `x y timestamp button` or `x y timestamp button azimuth altitude pressure`.
/// Metadata (user, session, kind, index) is not part of the format and is left
/// at its defaults.
inline SignatureRecord parse_svc(std::string_view text) {
  const auto lines = detail::split_lines(text);
  if (lines.empty()) throw ParseError(1, "missing sample-count header");
  const auto header = detail::split_ws(lines[0]);
  if (header.size() != 1) throw ParseError(1, "malformed header, expected a single sample count");
  const std::int64_t declared = detail::to_int(header[0], 1);
  if (declared < 0) throw ParseError(1, "negative sample count");

  SignatureRecord record;
  record.samples.reserve(static_cast<std::size_t>(declared));
  std::size_t columns = 0;
  for (std::int64_t k = 0; k < declared; ++k) {
    const std::size_t line_no = static_cast<std::size_t>(k) + 2;
    if (line_no - 1 >= lines.size()) {
      throw ParseError(line_no, "sample count mismatch: header declares " + std::to_string(declared) +
                                    " samples, file has " + std::to_string(k));
    }
    const auto tokens = detail::split_ws(lines[line_no - 1]);
    if (tokens.size() != 4 && tokens.size() != 7) {
      throw ParseError(line_no, "expected 4 or 7 columns, found " + std::to_string(tokens.size()));
    }
    if (columns == 0) {
      columns = tokens.size();
    } else if (tokens.size() != columns) {
      throw ParseError(line_no, "column count changes within the file");
    }
    PenSample s;
    s.x = detail::to_int(tokens[0], line_no);
    s.y = detail::to_int(tokens[1], line_no);
    s.timestamp = detail::to_int(tokens[2], line_no);
    s.pen_down = detail::to_int(tokens[3], line_no) != 0;
    if (columns == 7) {
      detail::to_int(tokens[4], line_no);  // azimuth, unused
      detail::to_int(tokens[5], line_no);  // altitude, unused
      const std::int64_t p = detail::to_int(tokens[6], line_no);
      if (p < 0 || p > kMaxPressure) throw ParseError(line_no, "pressure outside [0, 1023]");
      s.pressure = static_cast<int>(p);
    } else {
      s.pressure = kDefaultPressure;
    }
    if (!record.samples.empty() && s.timestamp < record.samples.back().timestamp) {
      throw ParseError(line_no, "decreasing timestamp");
    }
    record.samples.push_back(s);
  }
  for (std::size_t i = static_cast<std::size_t>(declared) + 1; i < lines.size(); ++i) {
    if (!detail::split_ws(lines[i]).empty()) {
      throw ParseError(i + 1, "sample count mismatch: data beyond the declared " + std::to_string(declared) +
                                  " samples");
    }
  }
  record.has_pressure = columns != 4;
  if (record.samples.size() < 2) throw ParseError(1, "a signature needs at least 2 samples");
  return record;
}

/// Inverse of parse_svc. Azimuth and altitude are written as 0; the pressure
/// columns are omitted for pressure-free records.
inline std::string emit_svc(const SignatureRecord& record) {
  std::string out = std::to_string(record.samples.size());
  out += '\n';
  for (const auto& s : record.samples) {
    out += std::to_string(s.x);
    out += ' ';
    out += std::to_string(s.y);
    out += ' ';
    out += std::to_string(s.timestamp);
    out += s.pen_down ? " 1" : " 0";
    if (record.has_pressure) {
      out += " 0 0 ";
      out += std::to_string(s.pressure);
    }
    out += '\n';
  }
  return out;
}

/// Removes pen-up samples. The result may violate the 2-sample minimum, which
/// the caller is expected to check.
inline SignatureRecord drop_pen_up(SignatureRecord record) {
  std::erase_if(record.samples, [](const PenSample& s) { return !s.pen_down; });
  return record;
}

// ---------------------------------------------------------------------------
// Dataset layout: <root>/<user_id>/<kind>_<session>_<index>.svc, kind being
// "genuine" or "forgery". A manifest (tab-separated: path, user, kind,
// session, index; '#' comments) overrides the layout when given.

struct LoadOptions {
  bool drop_pen_up = false;
  std::filesystem::path manifest;  // empty: scan the directory layout
};

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline SignatureKind parse_kind(std::string_view s) {
  if (s == "genuine") return SignatureKind::Genuine;
  if (s == "forgery") return SignatureKind::SkilledForgery;
  throw Error("unknown signature kind '" + std::string(s) + "'");
}

inline bool parse_layout_name(const std::string& stem, SignatureKind& kind, int& session, int& index) {
  const auto a = stem.find('_');
  const auto b = stem.rfind('_');
  if (a == std::string::npos || a == b) return false;
  try {
    kind = parse_kind(std::string_view(stem).substr(0, a));
    std::size_t used = 0;
    const std::string s1 = stem.substr(a + 1, b - a - 1);
    const std::string s2 = stem.substr(b + 1);
    session = std::stoi(s1, &used);
    if (used != s1.size()) return false;
    index = std::stoi(s2, &used);
    if (used != s2.size()) return false;
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

inline SignatureRecord load_one(const std::filesystem::path& path, const LoadOptions& options) {
  SignatureRecord record;
  try {
    record = parse_svc(read_file(path));
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
  if (options.drop_pen_up) {
    const bool has_pressure = record.has_pressure;
    record = drop_pen_up(std::move(record));
    record.has_pressure = has_pressure;
  }
  return record;
}

}  // namespace detail

inline std::filesystem::path layout_path(const std::filesystem::path& root, const SignatureRecord& r) {
  return root / r.user_id /
         (std::string(kind_name(r.kind)) + "_" + std::to_string(r.session) + "_" + std::to_string(r.sample_index) +
          ".svc");
}

inline void sort_records(std::vector<SignatureRecord>& records) {
  std::sort(records.begin(), records.end(), [](const SignatureRecord& a, const SignatureRecord& b) {
    return std::tie(a.user_id, a.kind, a.session, a.sample_index) <
           std::tie(b.user_id, b.kind, b.session, b.sample_index);
  });
}

/// Loads every record under `root`, sorted by (user, kind, session, index).
inline std::vector<SignatureRecord> load_dataset(const std::filesystem::path& root, const LoadOptions& options = {}) {
  namespace fs = std::filesystem;
  std::vector<SignatureRecord> records;
  if (!options.manifest.empty()) {
    std::istringstream in(detail::read_file(options.manifest));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      std::vector<std::string> fields;
      std::stringstream ls(line);
      std::string field;
      while (std::getline(ls, field, '\t')) fields.push_back(field);
      if (fields.size() != 5) throw ParseError(line_no, "manifest rows need 5 tab-separated fields");
      auto record = detail::load_one(fs::path(fields[0]).is_absolute() ? fs::path(fields[0]) : root / fields[0],
                                     options);
      record.user_id = fields[1];
      record.kind = detail::parse_kind(fields[2]);
      try {
        record.session = std::stoi(fields[3]);
        record.sample_index = std::stoi(fields[4]);
      } catch (const std::exception&) {
        throw ParseError(line_no, "non-numeric session or index");
      }
      records.push_back(std::move(record));
    }
  } else {
    if (!fs::is_directory(root)) throw Error("dataset root is not a directory: " + root.string());
    for (const auto& user_dir : fs::directory_iterator(root)) {
      if (!user_dir.is_directory()) continue;
      for (const auto& file : fs::directory_iterator(user_dir.path())) {
        if (!file.is_regular_file() || file.path().extension() != ".svc") continue;
        SignatureKind kind{};
        int session = 0;
        int index = 0;
        if (!detail::parse_layout_name(file.path().stem().string(), kind, session, index)) {
          throw Error("unrecognised file name " + file.path().string());
        }
        auto record = detail::load_one(file.path(), options);
        record.user_id = user_dir.path().filename().string();
        record.kind = kind;
        record.session = session;
        record.sample_index = index;
        records.push_back(std::move(record));
      }
    }
  }
  sort_records(records);
  return records;
}

inline void write_dataset(const std::filesystem::path& root, const std::vector<SignatureRecord>& records) {
  namespace fs = std::filesystem;
  for (const auto& record : records) {
    const auto path = layout_path(root, record);
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << emit_svc(record);
  }
}

// ---------------------------------------------------------------------------
// Protocol

struct ProtocolCounts {
  int enrollment = 4;     // genuine, enrollment session
  int test_genuine = 12;  // genuine, later sessions
  int forgeries = 12;     // skilled forgeries
  int enrollment_session = 1;
};

/// One user's signatures as indices into DatasetSplit::records.
struct UserProtocol {
  std::string user_id;
  std::vector<std::size_t> enrollment;
  std::vector<std::size_t> genuine;
  std::vector<std::size_t> forgeries;
};

struct DatasetSplit {
  std::vector<SignatureRecord> records;
  std::vector<UserProtocol> development;
  std::vector<UserProtocol> evaluation;
  ProtocolCounts counts;
};

enum class Partition { Development, Evaluation };

/// Groups records by user (lexicographic id order), assigns the first
/// `n_dev_users` to development and the rest to evaluation, and selects per
/// user the enrollment, test-genuine and forgery signatures. Within each
/// category signatures are taken in (session, index) order.
inline DatasetSplit build_split(const std::vector<SignatureRecord>& records, std::size_t n_dev_users,
                                const ProtocolCounts& counts = {}) {
  if (counts.enrollment <= 0 || counts.test_genuine <= 0 || counts.forgeries <= 0) {
    throw ProtocolError("protocol counts must be positive");
  }
  std::map<std::string, std::vector<const SignatureRecord*>> by_user;
  for (const auto& r : records) by_user[r.user_id].push_back(&r);
  if (n_dev_users > by_user.size()) {
    throw ProtocolError("requested " + std::to_string(n_dev_users) + " development users but the dataset has " +
                        std::to_string(by_user.size()));
  }

  DatasetSplit split;
  split.counts = counts;
  std::size_t user_no = 0;
  for (auto& [user, list] : by_user) {
    std::sort(list.begin(), list.end(), [](const SignatureRecord* a, const SignatureRecord* b) {
      return std::tie(a->session, a->sample_index) < std::tie(b->session, b->sample_index);
    });
    std::vector<const SignatureRecord*> enrol, genuine, forged;
    for (const auto* r : list) {
      if (r->kind == SignatureKind::SkilledForgery) {
        forged.push_back(r);
      } else if (r->session == counts.enrollment_session) {
        enrol.push_back(r);
      } else {
        genuine.push_back(r);
      }
    }
    auto require = [&](std::size_t have, int need, const char* what) {
      if (have < static_cast<std::size_t>(need)) {
        throw ProtocolError("user " + user + " has " + std::to_string(have) + " " + what + " signatures, needs " +
                            std::to_string(need));
      }
    };
    require(enrol.size(), counts.enrollment, "enrollment-session genuine");
    require(genuine.size(), counts.test_genuine, "later-session genuine");
    require(forged.size(), counts.forgeries, "skilled forgery");

    UserProtocol up;
    up.user_id = user;
    auto take = [&](const std::vector<const SignatureRecord*>& from, int n, std::vector<std::size_t>& into) {
      for (int k = 0; k < n; ++k) {
        validate(*from[static_cast<std::size_t>(k)]);
        into.push_back(split.records.size());
        split.records.push_back(*from[static_cast<std::size_t>(k)]);
      }
    };
    take(enrol, counts.enrollment, up.enrollment);
    take(genuine, counts.test_genuine, up.genuine);
    take(forged, counts.forgeries, up.forgeries);
    (user_no < n_dev_users ? split.development : split.evaluation).push_back(std::move(up));
    ++user_no;
  }
  return split;
}

inline const std::vector<UserProtocol>& users_of(const DatasetSplit& split, Partition partition) {
  return partition == Partition::Development ? split.development : split.evaluation;
}

/// An (enrollment, probe) comparison. `enrollment` and `probe` index into
/// DatasetSplit::records; the slots give the position within the user's
/// enrollment and probe lists (used by 4vs1 aggregation).
struct SignaturePair {
  std::size_t enrollment = 0;
  std::size_t probe = 0;
  int label = 0;  // 1 genuine-genuine, 0 genuine-forgery
  std::size_t user = 0;  // position within the partition
  int enrollment_slot = 0;
  int probe_slot = 0;
};

struct PairList {
  std::vector<SignaturePair> pairs;

  std::size_t count(int label) const {
    return static_cast<std::size_t>(
        std::count_if(pairs.begin(), pairs.end(), [&](const SignaturePair& p) { return p.label == label; }));
  }
};

/// Per user in partition order: all genuine pairs (enrollment-major), then all
/// skilled-forgery pairs in the same order.
inline PairList build_pairs(const DatasetSplit& split, Partition partition) {
  PairList out;
  const auto& users = users_of(split, partition);
  for (std::size_t u = 0; u < users.size(); ++u) {
    const auto& up = users[u];
    for (int label : {1, 0}) {
      const auto& probes = label == 1 ? up.genuine : up.forgeries;
      for (std::size_t e = 0; e < up.enrollment.size(); ++e) {
        for (std::size_t p = 0; p < probes.size(); ++p) {
          out.pairs.push_back({up.enrollment[e], probes[p], label, u, static_cast<int>(e), static_cast<int>(p)});
        }
      }
    }
  }
  return out;
}

/// Random-forgery variant: every enrollment signature of a user against the
/// first test-genuine signature of each other user of the same partition,
/// plus the usual genuine pairs. Impostor probe slots enumerate the other users.
inline PairList build_random_forgery_pairs(const DatasetSplit& split, Partition partition) {
  PairList out;
  const auto& users = users_of(split, partition);
  for (std::size_t u = 0; u < users.size(); ++u) {
    const auto& up = users[u];
    for (std::size_t e = 0; e < up.enrollment.size(); ++e) {
      for (std::size_t p = 0; p < up.genuine.size(); ++p) {
        out.pairs.push_back({up.enrollment[e], up.genuine[p], 1, u, static_cast<int>(e), static_cast<int>(p)});
      }
    }
    for (std::size_t e = 0; e < up.enrollment.size(); ++e) {
      int slot = 0;
      for (std::size_t v = 0; v < users.size(); ++v) {
        if (v == u) continue;
        out.pairs.push_back({up.enrollment[e], users[v].genuine.front(), 0, u, static_cast<int>(e), slot++});
      }
    }
  }
  return out;
}

}  // namespace sigver
