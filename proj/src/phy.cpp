#include "aoirrm/phy.hpp"

#include <algorithm>
#include <limits>
#include <random>

namespace aoirrm::phy {

void validate(const PhyParams& p) {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(p.phi, "phi");
  positive(p.rho, "rho");
  positive(p.eta, "eta");
  positive(p.ell0_m, "ell0_m");
  positive(p.psi, "psi");
  positive(p.bandwidth_hz, "bandwidth_hz");
  positive(p.noise_psd_w_per_hz, "noise_psd");
  positive(p.slot_s, "slot_s");
  positive(p.packet_bits, "packet_bits");
  positive(p.p_max_w, "p_max_w");
  if (!(p.interference_w >= 0.0)) throw ConfigError("interference_w must be non-negative");
  const double bound = p.phi * std::pow(p.ell0_m / 2.0, p.eta);
  if (!(p.rho < bound)) {
    throw ConfigError("path-loss coefficients violate rho < phi * (ell0/2)^eta (" +
                      std::to_string(p.rho) + " >= " + std::to_string(bound) + ")");
  }
}

void validate(const TrafficParams& t) {
  if (!(t.lambda_pkts_per_slot >= 0.0)) throw ConfigError("arrival_rate must be non-negative");
  if (t.x_max < t.lambda_pkts_per_slot) throw ConfigError("x_max must be at least arrival_rate");
  if (t.r_max_global < 1) throw ConfigError("r_max_global must be at least 1");
  if (t.a_max_slots < 2) throw ConfigError("a_max_slots must be at least 2");
}

double channel_gain(mobility::LinkClass link, Vec2 vtx, Vec2 vrx, const PhyParams& p) {
  using mobility::LinkClass;
  double base = 0.0;
  double coeff = p.phi;
  switch (link) {
    case LinkClass::los:
      base = norm2(vtx - vrx);
      break;
    case LinkClass::wlos:
      base = norm1(vtx - vrx);
      break;
    case LinkClass::nlos:
      // product of each vehicle's own coordinate difference
      base = std::abs(vtx.x - vtx.y) * std::abs(vrx.x - vrx.y);
      coeff = p.rho;
      break;
  }
  if (!(base > 0.0)) {
    throw SingularGeometryError(std::string("channel_gain: zero distance term for ") +
                                mobility::to_string(link) + " link");
  }
  return p.psi * coeff * std::pow(base, -p.eta);
}

int capacity_packets(double h, int f, const PhyParams& p) {
  if (f == 0 || !(h > 0.0)) return 0;
  const double snr = h * p.p_max_w / p.interference_plus_noise_w();
  const double packets = p.slot_s * p.bandwidth_hz * std::log2(1.0 + snr) / p.packet_bits;
  if (packets >= static_cast<double>(std::numeric_limits<int>::max())) {
    return std::numeric_limits<int>::max();
  }
  return static_cast<int>(std::floor(packets));
}

int max_packets(double h, int f, const PhyParams& p, int r_max_global) {
  return std::min(capacity_packets(h, f, p), r_max_global);
}

double tx_power(double h, int f, int r, const PhyParams& p) {
  if (r < 0) throw PreconditionError("tx_power: negative packet count");
  if (f == 0) {
    if (r != 0) throw PowerBudgetError("tx_power: packets scheduled without a band");
    return 0.0;
  }
  if (r == 0) return 0.0;
  if (r > capacity_packets(h, f, p)) {
    throw PowerBudgetError("tx_power: " + std::to_string(r) +
                           " packets exceed the per-slot capacity");
  }
  const double exponent = p.packet_bits * r / (p.bandwidth_hz * p.slot_s);
  return p.interference_plus_noise_w() / h * (std::exp2(exponent) - 1.0);
}

int sample_arrivals(const TrafficParams& t, Rng& rng) {
  if (t.lambda_pkts_per_slot <= 0.0) return 0;
  std::poisson_distribution<long long> dist(t.lambda_pkts_per_slot);
  return static_cast<int>(std::min<long long>(dist(rng), t.x_max));
}

int packet_drops(int x, int f, int r) {
  if (x < 0 || r < 0 || (f == 0 && r != 0) || (f == 1 && r > x) || (f != 0 && f != 1)) {
    throw PreconditionError("packet_drops: scheduled packets inconsistent with arrivals");
  }
  return x - f * r;
}

int advance_aoi(int a_slots, int f, int r, int a_max) {
  if (f * r > 0) return 1;
  return std::min(a_slots + 1, a_max);
}

}  // namespace aoirrm::phy
