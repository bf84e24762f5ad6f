#include "qloc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "qloc/rng.hpp"

namespace qloc {

namespace {

std::int64_t poisson_count(Rng& rng, double mean) {
  // Knuth's product method below 30; larger means split exactly in half
  // (a Poisson variate is the sum of two independent halves).
  if (mean <= 0.0) return 0;
  if (mean < 30.0) {
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double prod = rng.uniform01();
    while (prod > limit) {
      ++k;
      prod *= rng.uniform01();
    }
    return k;
  }
  return poisson_count(rng, mean / 2.0) + poisson_count(rng, mean / 2.0);
}

std::int64_t resolve_count(Rng& rng, double n_photons, CountMode mode) {
  if (!(n_photons >= 1.0)) {
    throw ConfigError("sampling requires n_photons >= 1");
  }
  if (mode == CountMode::ExactN) {
    return static_cast<std::int64_t>(std::llround(n_photons));
  }
  return poisson_count(rng, n_photons);
}

std::vector<double> cumulative_weights(const Eigen::VectorXd& probs,
                                       double tail_mass) {
  std::vector<double> cum(static_cast<std::size_t>(probs.size()) + 1);
  double acc = 0.0;
  for (int q = 0; q < probs.size(); ++q) {
    acc += probs(q);
    cum[static_cast<std::size_t>(q)] = acc;
  }
  cum.back() = acc + tail_mass;
  return cum;
}

MeasurementBatch sample_categorical(const Eigen::VectorXd& probs,
                                    double tail_mass, MeasurementKind kind,
                                    const SceneGeometry& geometry,
                                    const GaussianPsf& psf, double n_photons,
                                    std::uint64_t seed, CountMode mode) {
  MeasurementBatch batch;
  batch.kind = kind;
  batch.count_mode = mode;
  batch.seed = seed;
  batch.scene = geometry;
  batch.psf = psf;
  batch.intended_photons = n_photons;
  batch.rng_algorithm = kRngAlgorithm;
  batch.n_outcome_bins = static_cast<int>(probs.size());

  Rng rng(seed);
  batch.n_photons_drawn = resolve_count(rng, n_photons, mode);
  const std::vector<double> cum = cumulative_weights(probs, tail_mass);
  const double total = cum.back();

  batch.indices.resize(static_cast<std::size_t>(batch.n_photons_drawn));
  for (auto& outcome : batch.indices) {
    const double u = rng.uniform01() * total;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    outcome = static_cast<int>(std::min<std::ptrdiff_t>(
        it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1));
  }
  return batch;
}

}  // namespace

std::vector<std::int64_t> MeasurementBatch::counts() const {
  if (kind == MeasurementKind::DirectImaging) {
    throw ConfigError("direct-imaging batches have no outcome bins");
  }
  std::vector<std::int64_t> c(static_cast<std::size_t>(n_outcome_bins) + 1, 0);
  for (int idx : indices) c[static_cast<std::size_t>(idx)] += 1;
  return c;
}

MeasurementBatch sample_direct(const SceneGeometry& geometry,
                               const GaussianPsf& psf, double n_photons,
                               std::uint64_t seed, CountMode mode) {
  MeasurementBatch batch;
  batch.kind = MeasurementKind::DirectImaging;
  batch.count_mode = mode;
  batch.seed = seed;
  batch.scene = geometry;
  batch.psf = psf;
  batch.intended_photons = n_photons;
  batch.rng_algorithm = kRngAlgorithm;

  Rng rng(seed);
  batch.n_photons_drawn = resolve_count(rng, n_photons, mode);
  batch.positions.resize(static_cast<std::size_t>(batch.n_photons_drawn));

  if (geometry.is_line()) {
    if (geometry.theta2 == 0.0) {
      throw ConfigError("degenerate line; use n=1 point");
    }
    const double lo = geometry.theta1 - 0.5 * geometry.theta2;
    const double hi = geometry.theta1 + 0.5 * geometry.theta2;
    for (auto& x : batch.positions) {
      x = rng.uniform(lo, hi) + psf.sigma * rng.normal();
    }
  } else {
    const auto xs = source_positions(geometry);
    const auto n = static_cast<double>(xs.size());
    for (auto& x : batch.positions) {
      const auto s = std::min<std::size_t>(
          static_cast<std::size_t>(rng.uniform01() * n), xs.size() - 1);
      x = xs[s] + psf.sigma * rng.normal();
    }
  }
  return batch;
}

MeasurementBatch sample_modes(const ModalDistribution& distribution,
                              const SceneGeometry& geometry,
                              const GaussianPsf& psf, double n_photons,
                              std::uint64_t seed, CountMode mode) {
  return sample_categorical(distribution.probs, distribution.tail_mass,
                            MeasurementKind::HgSpade, geometry, psf, n_photons,
                            seed, mode);
}

MeasurementBatch sample_sld(const SldMeasurement& measurement,
                            const SceneGeometry& true_geometry,
                            double n_photons, std::uint64_t seed,
                            CountMode mode) {
  const ModalDistribution dist = measurement.outcome_probs(true_geometry);
  return sample_categorical(dist.probs, dist.tail_mass,
                            MeasurementKind::SldBasis, true_geometry,
                            measurement.psf, n_photons, seed, mode);
}

namespace {

const char* kind_name(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::DirectImaging: return "direct";
    case MeasurementKind::HgSpade: return "hg";
    case MeasurementKind::SldBasis: return "sld";
  }
  return "?";
}

MeasurementKind kind_from_name(const std::string& name) {
  if (name == "direct") return MeasurementKind::DirectImaging;
  if (name == "hg") return MeasurementKind::HgSpade;
  if (name == "sld") return MeasurementKind::SldBasis;
  throw ConfigError("unknown measurement kind \"" + name + "\"");
}

void append_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

}  // namespace

std::string batch_to_csv(const MeasurementBatch& batch) {
  std::string out = "kind,seed,n,sigma,theta1,theta2,scene,bins\n";
  out += kind_name(batch.kind);
  out += ',' + std::to_string(batch.seed);
  out += ',' + std::to_string(batch.n_photons_drawn);
  out += ',';
  append_double(out, batch.psf.sigma);
  out += ',';
  append_double(out, batch.scene.theta1);
  out += ',';
  append_double(out, batch.scene.theta2);
  out += ',';
  out += batch.scene.is_line() ? "line" : ("points:" + std::to_string(batch.scene.n));
  out += ',' + std::to_string(batch.n_outcome_bins);
  out += "\noutcome\n";
  if (batch.kind == MeasurementKind::DirectImaging) {
    for (double x : batch.positions) {
      append_double(out, x);
      out += '\n';
    }
  } else {
    for (int q : batch.indices) {
      out += std::to_string(q);
      out += '\n';
    }
  }
  return out;
}

MeasurementBatch batch_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("kind,", 0) != 0) {
    throw ConfigError("batch CSV: missing header line");
  }
  if (!std::getline(in, line)) throw ConfigError("batch CSV: missing metadata");

  std::vector<std::string> fields;
  std::istringstream meta(line);
  std::string tok;
  while (std::getline(meta, tok, ',')) fields.push_back(tok);
  if (fields.size() != 8) throw ConfigError("batch CSV: malformed metadata row");

  MeasurementBatch batch;
  batch.kind = kind_from_name(fields[0]);
  batch.seed = std::stoull(fields[1]);
  batch.n_photons_drawn = std::stoll(fields[2]);
  batch.psf = GaussianPsf(std::stod(fields[3]));
  const double theta1 = std::stod(fields[4]);
  const double theta2 = std::stod(fields[5]);
  if (fields[6] == "line") {
    batch.scene = SceneGeometry::line(theta1, theta2);
  } else if (fields[6].rfind("points:", 0) == 0) {
    batch.scene =
        SceneGeometry::points(std::stoi(fields[6].substr(7)), theta1, theta2);
  } else {
    throw ConfigError("batch CSV: malformed scene field");
  }
  batch.n_outcome_bins = std::stoi(fields[7]);
  batch.intended_photons = static_cast<double>(batch.n_photons_drawn);
  batch.rng_algorithm = kRngAlgorithm;

  if (!std::getline(in, line) || line != "outcome") {
    throw ConfigError("batch CSV: missing outcome section");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (batch.kind == MeasurementKind::DirectImaging) {
      batch.positions.push_back(std::stod(line));
    } else {
      batch.indices.push_back(std::stoi(line));
    }
  }
  return batch;
}

namespace {

template <class T>
void put_raw(std::vector<std::uint8_t>& out, const T& v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get_raw(const std::vector<std::uint8_t>& in, std::size_t& at) {
  if (at + sizeof(T) > in.size()) {
    throw ConfigError("count binary: truncated payload");
  }
  T v;
  std::memcpy(&v, in.data() + at, sizeof(T));
  at += sizeof(T);
  return v;
}

constexpr std::uint32_t kCountMagic = 0x42434C51;  // "QLCB" little-endian

}  // namespace

std::vector<std::uint8_t> batch_to_count_binary(const MeasurementBatch& batch) {
  if (batch.kind == MeasurementKind::DirectImaging) {
    throw ConfigError("count binary form is defined for modal batches only");
  }
  const auto counts = batch.counts();
  std::vector<std::uint8_t> out;
  put_raw(out, kCountMagic);
  put_raw(out, std::uint32_t{1});  // version
  put_raw(out, std::uint8_t(batch.kind == MeasurementKind::HgSpade ? 0 : 1));
  put_raw(out, batch.seed);
  put_raw(out, batch.n_photons_drawn);
  put_raw(out, batch.psf.sigma);
  put_raw(out, batch.scene.theta1);
  put_raw(out, batch.scene.theta2);
  put_raw(out, std::uint32_t(counts.size()));
  for (std::int64_t c : counts) put_raw(out, c);
  return out;
}

CountVectorBatch batch_from_count_binary(
    const std::vector<std::uint8_t>& blob) {
  std::size_t at = 0;
  if (get_raw<std::uint32_t>(blob, at) != kCountMagic) {
    throw ConfigError("count binary: bad magic");
  }
  if (get_raw<std::uint32_t>(blob, at) != 1) {
    throw ConfigError("count binary: unsupported version");
  }
  CountVectorBatch out;
  out.kind = get_raw<std::uint8_t>(blob, at) == 0 ? MeasurementKind::HgSpade
                                                  : MeasurementKind::SldBasis;
  out.seed = get_raw<std::uint64_t>(blob, at);
  out.n_photons = get_raw<std::int64_t>(blob, at);
  out.sigma = get_raw<double>(blob, at);
  out.theta1 = get_raw<double>(blob, at);
  out.theta2 = get_raw<double>(blob, at);
  const auto bins = get_raw<std::uint32_t>(blob, at);
  out.counts.resize(bins);
  for (auto& c : out.counts) c = get_raw<std::int64_t>(blob, at);
  return out;
}

}  // namespace qloc
