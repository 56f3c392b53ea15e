#include "emostress/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>

#include "emostress/error.hpp"
#include "emostress/rng.hpp"

namespace emostress {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Unassigned: return "";
  }
  return "";
}

std::map<CorpusEmotion, std::size_t> Manifest::emotion_counts() const {
  std::map<CorpusEmotion, std::size_t> out;
  for (const auto& r : records) ++out[r.emotion];
  return out;
}

std::map<std::string, std::size_t> Manifest::speaker_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& r : records) ++out[r.speaker];
  return out;
}

std::size_t Manifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const ClipRecord& r) { return r.split == split; }));
}

namespace {

bool ends_with_wav(std::string_view s) {
  if (s.size() < 4) return false;
  auto ext = s.substr(s.size() - 4);
  std::string lower(ext);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  return lower == ".wav";
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::pair<std::string_view, std::string_view> split_parent(std::string_view relpath) {
  const auto slash = relpath.find_last_of('/');
  if (slash == std::string_view::npos) return {{}, relpath};
  auto dir = relpath.substr(0, slash);
  const auto prev = dir.find_last_of('/');
  if (prev != std::string_view::npos) dir = dir.substr(prev + 1);
  return {dir, relpath.substr(slash + 1)};
}

}  // namespace

EmoDbName parse_emodb_filename(std::string_view name) {
  const auto slash = name.find_last_of('/');
  if (slash != std::string_view::npos) name = name.substr(slash + 1);
  if (name.size() != 11 || !ends_with_wav(name)) throw Error(Errc::BadName, "not an Emo-DB file name: " + std::string(name));
  const auto stem = name.substr(0, 7);
  if (!all_digits(stem.substr(0, 2)) || !std::isalpha(static_cast<unsigned char>(stem[2])) ||
      !all_digits(stem.substr(3, 2)) || !std::isalpha(static_cast<unsigned char>(stem[6]))) {
    throw Error(Errc::BadName, "not an Emo-DB file name: " + std::string(name));
  }
  CorpusEmotion emotion;
  switch (stem[5]) {
    case 'W': emotion = CorpusEmotion::Angry; break;
    case 'L': emotion = CorpusEmotion::Boredom; break;
    case 'E': emotion = CorpusEmotion::Disgust; break;
    case 'A': emotion = CorpusEmotion::Fear; break;
    case 'F': emotion = CorpusEmotion::Happy; break;
    case 'T': emotion = CorpusEmotion::Sad; break;
    case 'N': emotion = CorpusEmotion::Neutral; break;
    default:
      throw Error(Errc::UnknownEmotionCode, std::string("emotion letter '") + stem[5] + "' in " + std::string(name));
  }
  return {std::string(stem.substr(0, 2)), std::string(stem.substr(2, 3)), emotion, std::string(stem.substr(6, 1))};
}

SaveeName parse_savee_path(std::string_view relpath) {
  const auto [dir, file] = split_parent(relpath);
  if (dir.empty() || !ends_with_wav(file)) {
    throw Error(Errc::BadName, "expected <speaker>/<code><nn>.wav: " + std::string(relpath));
  }
  static const std::set<std::string_view> speakers = {"DC", "JE", "JK", "KL"};
  if (!speakers.contains(dir)) throw Error(Errc::UnknownSpeaker, std::string(dir) + " in " + std::string(relpath));

  const auto stem = file.substr(0, file.size() - 4);
  std::size_t digits = 0;
  while (digits < stem.size() && std::isdigit(static_cast<unsigned char>(stem[stem.size() - 1 - digits]))) ++digits;
  if (digits != 2 || stem.size() <= 2) throw Error(Errc::BadName, "expected a two-digit index: " + std::string(relpath));
  const auto code = stem.substr(0, stem.size() - 2);
  const auto index = std::stoi(std::string(stem.substr(stem.size() - 2)));

  static const std::array<std::pair<std::string_view, CorpusEmotion>, 7> codes = {{
      {"sa", CorpusEmotion::Sad},
      {"su", CorpusEmotion::Surprise},
      {"a", CorpusEmotion::Angry},
      {"d", CorpusEmotion::Disgust},
      {"f", CorpusEmotion::Fear},
      {"h", CorpusEmotion::Happy},
      {"n", CorpusEmotion::Neutral},
  }};
  for (const auto& [prefix, emotion] : codes)
    if (code == prefix) return {std::string(dir), emotion, index};
  throw Error(Errc::UnknownEmotionCode, "'" + std::string(code) + "' in " + std::string(relpath));
}

SynthName parse_synth_path(std::string_view relpath) {
  const auto [dir, file] = split_parent(relpath);
  if (dir.empty() || !ends_with_wav(file)) throw Error(Errc::BadName, "expected <speaker>/<emotion>_<nn>.wav: " + std::string(relpath));
  const auto stem = file.substr(0, file.size() - 4);
  const auto underscore = stem.find('_');
  if (underscore == std::string_view::npos || stem.size() - underscore - 1 < 2 || !all_digits(stem.substr(underscore + 1))) {
    throw Error(Errc::BadName, "expected <emotion>_<nn>: " + std::string(relpath));
  }
  std::string name(stem.substr(0, underscore));
  if (name.empty() || !std::all_of(name.begin(), name.end(), [](unsigned char c) { return std::islower(c); })) {
    throw Error(Errc::BadName, "emotion names are lower-case: " + std::string(relpath));
  }
  if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
  const auto emotion = corpus_emotion_from_string(name);
  if (!emotion || *emotion == CorpusEmotion::Surprise) {
    throw Error(Errc::UnknownEmotionCode, std::string(stem.substr(0, underscore)) + " in " + std::string(relpath));
  }
  return {std::string(dir), *emotion, std::stoi(std::string(stem.substr(underscore + 1)))};
}

Manifest build_manifest(const std::filesystem::path& root, DatasetKind kind) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(Errc::MissingDirectory, root.string());

  std::vector<std::string> paths;
  for (auto it = fs::recursive_directory_iterator(root, fs::directory_options::follow_directory_symlink, ec);
       !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
    if (!it->is_regular_file()) continue;
    const auto rel = fs::relative(it->path(), root).generic_string();
    if (ends_with_wav(rel)) paths.push_back(rel);
  }
  if (ec) throw Error(Errc::IoError, "scanning " + root.string() + ": " + ec.message());
  std::sort(paths.begin(), paths.end());

  Manifest m;
  std::vector<std::string> failures;
  for (const auto& rel : paths) {
    try {
      ClipRecord r;
      r.path = rel;
      r.dataset = kind;
      switch (kind) {
        case DatasetKind::EmoDB: {
          auto n = parse_emodb_filename(rel);
          r.speaker = n.speaker;
          r.emotion = n.emotion;
          r.aux = n.text + n.version;
          break;
        }
        case DatasetKind::SAVEE: {
          auto n = parse_savee_path(rel);
          r.speaker = n.speaker;
          r.emotion = n.emotion;
          r.aux = std::to_string(n.index);
          break;
        }
        case DatasetKind::Synth: {
          auto n = parse_synth_path(rel);
          r.speaker = n.speaker;
          r.emotion = n.emotion;
          r.aux = std::to_string(n.index);
          break;
        }
      }
      m.records.push_back(std::move(r));
    } catch (const Error& e) {
      failures.push_back(rel + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = std::to_string(failures.size()) + " unparseable file(s) under " + root.string();
    for (const auto& f : failures) msg += "\n  " + f;
    throw Error(Errc::ParseErrors, msg);
  }
  // Filename-only Emo-DB parsing can collide when the same clip sits in two subdirectories.
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    const std::string key = kind == DatasetKind::EmoDB ? fs::path(r.path).filename().string() : r.path;
    if (!seen.insert(key).second) throw Error(Errc::DuplicatePath, r.path);
  }

  if (m.records.empty()) m.warnings.push_back("no .wav files found under " + root.string());
  if (kind == DatasetKind::SAVEE && !m.records.empty() && m.records.size() != 480) {
    m.warnings.push_back("SAVEE has " + std::to_string(m.records.size()) + " files; the full corpus has 480");
  }
  if (kind == DatasetKind::EmoDB && !m.records.empty() && m.records.size() != 535) {
    m.warnings.push_back("Emo-DB has " + std::to_string(m.records.size()) + " files; the full corpus has 535");
  }
  return m;
}

Manifest split_manifest(Manifest manifest, std::size_t train_count, std::uint64_t seed, bool stratify) {
  const std::size_t n = manifest.records.size();
  if (train_count == 0 || train_count >= n) {
    throw Error(Errc::InvalidCount, "train_count must be in [1, " + std::to_string(n > 0 ? n - 1 : 0) + "], got " +
                                        std::to_string(train_count));
  }
  Rng rng(seed);
  for (auto& r : manifest.records) r.split = Split::Test;

  std::vector<std::vector<std::size_t>> groups;
  if (stratify) {
    std::map<CorpusEmotion, std::vector<std::size_t>> by_emotion;
    for (std::size_t i = 0; i < n; ++i) by_emotion[manifest.records[i].emotion].push_back(i);
    for (auto& [emotion, idx] : by_emotion) groups.push_back(std::move(idx));
  } else {
    groups.emplace_back(n);
    std::iota(groups[0].begin(), groups[0].end(), std::size_t{0});
  }

  // Largest remainder: floor quotas first, then hand out the rest by
  // descending fractional part (earlier group wins ties).
  std::vector<std::size_t> quota(groups.size());
  std::vector<std::pair<std::uint64_t, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::uint64_t scaled = static_cast<std::uint64_t>(groups[g].size()) * train_count;
    quota[g] = static_cast<std::size_t>(scaled / n);
    remainders.emplace_back(scaled % n, g);
    assigned += quota[g];
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < train_count; ++i, ++assigned) ++quota[remainders[i].second];

  for (std::size_t g = 0; g < groups.size(); ++g) {
    rng.shuffle(std::span(groups[g]));
    for (std::size_t i = 0; i < quota[g]; ++i) manifest.records[groups[g][i]].split = Split::Train;
  }
  return manifest;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(std::string_view line) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else if (c != '\r') {
      fields.back() += c;
    }
  }
  return fields;
}

}  // namespace

std::string manifest_to_csv(const Manifest& manifest) {
  std::ostringstream os;
  os << "path,dataset,speaker,emotion,aux,split\n";
  for (const auto& r : manifest.records) {
    os << csv_field(r.path) << ',' << to_string(r.dataset) << ',' << csv_field(r.speaker) << ',' << to_string(r.emotion)
       << ',' << csv_field(r.aux) << ',' << to_string(r.split) << '\n';
  }
  return os.str();
}

Manifest manifest_from_csv(std::string_view csv) {
  Manifest m;
  std::size_t line_no = 0;
  while (!csv.empty()) {
    const auto nl = csv.find('\n');
    const auto line = csv.substr(0, nl);
    csv = nl == std::string_view::npos ? std::string_view{} : csv.substr(nl + 1);
    ++line_no;
    if (line_no == 1) {
      if (line.substr(0, 5) != "path,") throw Error(Errc::ParseErrors, "manifest CSV lacks the expected header");
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto f = parse_csv_line(line);
    if (f.size() != 6) throw Error(Errc::ParseErrors, "manifest line " + std::to_string(line_no) + ": expected 6 fields");
    ClipRecord r;
    r.path = f[0];
    const auto kind = dataset_kind_from_string(f[1]);
    const auto emotion = corpus_emotion_from_string(f[3]);
    if (!kind || !emotion) throw Error(Errc::ParseErrors, "manifest line " + std::to_string(line_no) + ": bad dataset or emotion");
    r.dataset = *kind;
    r.speaker = f[2];
    r.emotion = *emotion;
    r.aux = f[4];
    if (f[5] == "train") r.split = Split::Train;
    else if (f[5] == "test") r.split = Split::Test;
    else if (f[5].empty()) r.split = Split::Unassigned;
    else throw Error(Errc::ParseErrors, "manifest line " + std::to_string(line_no) + ": bad split '" + f[5] + "'");
    m.records.push_back(std::move(r));
  }
  return m;
}

}  // namespace emostress
