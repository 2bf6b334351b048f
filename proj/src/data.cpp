#include "fgfm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fgfm/errors.hpp"
#include "fgfm/rng.hpp"

namespace fgfm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Distinct derive_seed streams so donor material and artifact parameters are
// independent of the base draw.
constexpr std::uint64_t kStreamDonor = 0xD0;
constexpr std::uint64_t kStreamArtifact = 0xA7;

struct HarmonicParams {
  double f0;
  std::vector<double> amps;
  std::vector<double> phases;
  double env_freq;
  double env_phase;
};

HarmonicParams draw_params(Rng& rng, std::size_t num_harmonics) {
  HarmonicParams p;
  p.f0 = rng.uniform(90.0, 280.0);
  p.amps.resize(num_harmonics);
  p.phases.resize(num_harmonics);
  for (std::size_t h = 0; h < num_harmonics; ++h) {
    p.amps[h] = (0.5 + rng.uniform()) / static_cast<double>(h + 1);
    p.phases[h] = rng.uniform(0.0, kTwoPi);
  }
  p.env_freq = rng.uniform(0.8, 2.5);
  p.env_phase = rng.uniform(0.0, kTwoPi);
  return p;
}

double render_sample(const HarmonicParams& p, std::size_t n, double sample_rate,
                     double phase_extra) {
  const double t = static_cast<double>(n) / sample_rate;
  const double env = 0.6 + 0.4 * std::sin(kTwoPi * p.env_freq * t + p.env_phase);
  double s = 0.0;
  for (std::size_t h = 0; h < p.amps.size(); ++h)
    s += p.amps[h] *
         std::sin(kTwoPi * (h + 1) * p.f0 * t + p.phases[h] + phase_extra);
  return env * s;
}

// Raw harmonic signal plus the factor that scales its peak to 0.5.
std::pair<std::vector<double>, double> render_normalized(
    const HarmonicParams& p, std::size_t samples, double sample_rate) {
  std::vector<double> x(samples);
  double peak = 0.0;
  for (std::size_t n = 0; n < samples; ++n) {
    x[n] = render_sample(p, n, sample_rate, 0.0);
    peak = std::max(peak, std::abs(x[n]));
  }
  const double factor = peak > 0.0 ? 0.5 / peak : 1.0;
  for (double& v : x) v *= factor;
  return {std::move(x), factor};
}

}  // namespace

ArtifactKind artifact_kind_from_string(const std::string& name) {
  if (name == "none") return ArtifactKind::none;
  if (name == "splice") return ArtifactKind::splice;
  if (name == "phase_jump") return ArtifactKind::phase_jump;
  if (name == "transition_blur") return ArtifactKind::transition_blur;
  throw FormatError("unknown artifact kind '" + name + "'");
}

std::string artifact_kind_to_string(ArtifactKind kind) {
  switch (kind) {
    case ArtifactKind::none: return "none";
    case ArtifactKind::splice: return "splice";
    case ArtifactKind::phase_jump: return "phase_jump";
    case ArtifactKind::transition_blur: return "transition_blur";
  }
  throw DataError("invalid artifact kind value");
}

Utterance generate_utterance(const SynthSpec& spec, const std::string& utt_id) {
  if (spec.num_frames == 0 || spec.samples_per_frame == 0 ||
      spec.num_harmonics == 0 || spec.sample_rate == 0)
    throw DataError("generate_utterance: degenerate synthesis spec");
  if (spec.label == 0) {
    if (spec.artifact_kind == ArtifactKind::none || spec.window_len == 0)
      throw DataError("spoof utterance needs a non-empty artifact window");
    if (spec.window_start + spec.window_len > spec.num_frames)
      throw DataError("artifact window [" + std::to_string(spec.window_start) +
                      ", " +
                      std::to_string(spec.window_start + spec.window_len) +
                      ") outside utterance of " +
                      std::to_string(spec.num_frames) + " frames");
  } else if (spec.artifact_kind != ArtifactKind::none || spec.window_len != 0) {
    throw DataError("bonafide utterance must not carry an artifact");
  }

  const std::size_t samples = spec.num_frames * spec.samples_per_frame;
  const double sr = static_cast<double>(spec.sample_rate);

  Rng rng(spec.seed);
  const HarmonicParams params = draw_params(rng, spec.num_harmonics);
  auto [waveform, factor] = render_normalized(params, samples, sr);

  Utterance utt;
  utt.utt_id = utt_id;
  utt.label = spec.label;
  utt.artifact_kind = spec.artifact_kind;
  utt.window_start = spec.window_start;
  utt.window_len = spec.window_len;
  utt.seed = spec.seed;
  utt.artifact_mask.assign(spec.num_frames, 0);

  if (spec.label == 0) {
    const std::size_t lo = spec.window_start * spec.samples_per_frame;
    const std::size_t hi = lo + spec.window_len * spec.samples_per_frame;
    for (std::size_t f = spec.window_start;
         f < spec.window_start + spec.window_len; ++f)
      utt.artifact_mask[f] = 1;

    Rng art(derive_seed(spec.seed, kStreamArtifact));
    switch (spec.artifact_kind) {
      case ArtifactKind::splice: {
        Rng donor_rng(derive_seed(spec.seed, kStreamDonor));
        const HarmonicParams donor = draw_params(donor_rng, spec.num_harmonics);
        auto [donor_wave, donor_factor] = render_normalized(donor, samples, sr);
        (void)donor_factor;
        for (std::size_t n = lo; n < hi; ++n) waveform[n] = donor_wave[n];
        break;
      }
      case ArtifactKind::phase_jump: {
        const double offset = art.uniform(kTwoPi / 4.0, kTwoPi * 3.0 / 4.0);
        for (std::size_t n = lo; n < hi; ++n)
          waveform[n] = factor * render_sample(params, n, sr, offset);
        break;
      }
      case ArtifactKind::transition_blur: {
        const std::ptrdiff_t radius = 8;
        const std::vector<double> original = waveform;
        const std::ptrdiff_t total = static_cast<std::ptrdiff_t>(samples);
        for (std::size_t n = lo; n < hi; ++n) {
          double acc = 0.0;
          std::size_t cnt = 0;
          for (std::ptrdiff_t d = -radius; d <= radius; ++d) {
            const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(n) + d;
            if (m >= 0 && m < total) {
              acc += original[static_cast<std::size_t>(m)];
              ++cnt;
            }
          }
          waveform[n] = acc / static_cast<double>(cnt);
        }
        break;
      }
      case ArtifactKind::none:
        break;  // unreachable, guarded above
    }
  }

  utt.waveform = std::move(waveform);
  return utt;
}

void validate(const DataConfig& cfg) {
  if (cfg.frames_per_utt == 0) throw ConfigError("frames_per_utt must be > 0");
  if (cfg.num_harmonics == 0) throw ConfigError("num_harmonics must be > 0");
  if (cfg.spoof_fraction < 0.0 || cfg.spoof_fraction > 1.0)
    throw ConfigError("spoof_fraction must lie in [0, 1]");
  if (cfg.window_min_frac <= 0.0 || cfg.window_max_frac > 1.0 ||
      cfg.window_min_frac > cfg.window_max_frac)
    throw ConfigError("window fractions must satisfy 0 < min <= max <= 1");
  if (cfg.artifact_kind != "mix") {
    try {
      artifact_kind_from_string(cfg.artifact_kind);
    } catch (const FormatError&) {
      // a bad kind in the config is a configuration error, not file corruption
      throw ConfigError("unknown artifact kind '" + cfg.artifact_kind +
                        "' (expected none, splice, phase_jump, "
                        "transition_blur or mix)");
    }
  }
}

std::vector<Utterance> generate_split(const DataConfig& cfg, std::size_t count,
                                      std::uint64_t split_seed,
                                      const std::string& id_prefix) {
  validate(cfg);
  const std::size_t frames = cfg.frames_per_utt;
  Rng rng(split_seed);
  std::vector<Utterance> utts;
  utts.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SynthSpec spec;
    spec.sample_rate = cfg.sample_rate;
    spec.num_frames = frames;
    spec.num_harmonics = cfg.num_harmonics;
    spec.seed = derive_seed(split_seed, 1000 + i);

    const bool spoof = rng.uniform() < cfg.spoof_fraction;
    if (spoof) {
      spec.label = 0;
      if (cfg.artifact_kind == "mix") {
        const ArtifactKind kinds[] = {ArtifactKind::splice,
                                      ArtifactKind::phase_jump,
                                      ArtifactKind::transition_blur};
        spec.artifact_kind = kinds[rng.index(3)];
      } else {
        spec.artifact_kind = artifact_kind_from_string(cfg.artifact_kind);
      }
      const auto wl_min = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::ceil(cfg.window_min_frac * static_cast<double>(frames))));
      const auto wl_max = std::max(
          wl_min, static_cast<std::size_t>(std::floor(
                      cfg.window_max_frac * static_cast<double>(frames))));
      spec.window_len = wl_min + rng.index(wl_max - wl_min + 1);
      spec.window_start = rng.index(frames - spec.window_len + 1);
    }

    char id[64];
    std::snprintf(id, sizeof id, "%s%05zu", id_prefix.c_str(), i);
    utts.push_back(generate_utterance(spec, id));
  }
  return utts;
}

void write_manifest(const std::vector<Utterance>& utts,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  for (const Utterance& u : utts) {
    out << u.utt_id << ' ' << (u.label == 1 ? "bonafide" : "spoof") << ' '
        << artifact_kind_to_string(u.artifact_kind) << ' ' << u.window_start
        << ' ' << u.window_len << ' ' << u.seed << '\n';
  }
  if (!out) throw IoError("failed writing manifest: " + path);
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ManifestEntry e;
    std::string label, kind;
    if (!(fields >> e.utt_id >> label >> kind >> e.window_start >>
          e.window_len >> e.seed))
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": malformed manifest line");
    if (label == "bonafide") {
      e.label = 1;
    } else if (label == "spoof") {
      e.label = 0;
    } else {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": unknown label '" + label + "'");
    }
    e.artifact_kind = artifact_kind_from_string(kind);
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw FormatError(path + ": empty manifest");
  return entries;
}

Utterance realize(const ManifestEntry& entry, const DataConfig& cfg) {
  SynthSpec spec;
  spec.sample_rate = cfg.sample_rate;
  spec.num_frames = cfg.frames_per_utt;
  spec.num_harmonics = cfg.num_harmonics;
  spec.artifact_kind = entry.artifact_kind;
  spec.window_start = entry.window_start;
  spec.window_len = entry.window_len;
  spec.label = entry.label;
  spec.seed = entry.seed;
  return generate_utterance(spec, entry.utt_id);
}

std::vector<Utterance> load_dataset(const std::string& manifest_path,
                                    const DataConfig& cfg) {
  std::vector<Utterance> utts;
  for (const ManifestEntry& e : read_manifest(manifest_path))
    utts.push_back(realize(e, cfg));
  return utts;
}

namespace {

constexpr char kFeatureMagic[4] = {'F', 'G', 'F', 'T'};
constexpr std::uint32_t kFeatureVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32_at(std::ifstream& in, const std::string& path,
                          std::size_t offset) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (in.gcount() != sizeof v)
    throw FormatError(path + ": truncated at byte offset " +
                      std::to_string(offset) + " (expected 4 more bytes)");
  return v;
}

}  // namespace

Tensor read_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path);

  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kFeatureMagic, 4) != 0)
    throw FormatError(path + ": bad magic at byte offset 0");
  const std::uint32_t version = read_u32_at(in, path, 4);
  if (version != kFeatureVersion)
    throw FormatError(path + ": unsupported format version " +
                      std::to_string(version) + " at byte offset 4");
  const std::uint32_t t = read_u32_at(in, path, 8);
  const std::uint32_t dim = read_u32_at(in, path, 12);
  if (t == 0)
    throw FormatError(path + ": empty utterance (T=0) at byte offset 8");
  if (dim == 0)
    throw FormatError(path + ": zero feature dim at byte offset 12");

  const std::size_t count = static_cast<std::size_t>(t) * dim;
  std::vector<float> payload(count);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got != count * sizeof(float))
    throw FormatError(path + ": truncated payload at byte offset 16: expected " +
                      std::to_string(count * sizeof(float)) + " bytes, found " +
                      std::to_string(got));

  Tensor out(Shape{t, dim});
  for (std::size_t i = 0; i < count; ++i)
    out.at(i) = static_cast<double>(payload[i]);
  return out;
}

void write_feature_file(const std::string& path, const Tensor& features) {
  if (features.rank() != 2)
    throw DimensionError("write_feature_file: features must be [T, dim]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open feature file for writing: " + path);
  out.write(kFeatureMagic, 4);
  write_u32(out, kFeatureVersion);
  write_u32(out, static_cast<std::uint32_t>(features.dim(0)));
  write_u32(out, static_cast<std::uint32_t>(features.dim(1)));
  std::vector<float> payload(features.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    payload[i] = static_cast<float>(features.at(i));
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw IoError("failed writing feature file: " + path);
}

}  // namespace fgfm
