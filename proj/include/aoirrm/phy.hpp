#pragma once

// Closed-form channel, power, capacity, traffic and AoI dynamics. All values
// are linear SI; dB quantities are converted once when a config is loaded.

#include "aoirrm/common.hpp"
#include "aoirrm/mobility.hpp"

namespace aoirrm::phy {

struct PhyParams {
  double phi = db_to_linear(-68.5);   // LOS/WLOS path-loss coefficient
  double rho = db_to_linear(-54.5);   // NLOS path-loss coefficient
  double eta = 1.61;                  // path-loss exponent
  double ell0_m = 15.0;               // WLOS radius around an intersection
  double psi = 1.0;                   // averaged fast-fading factor
  double bandwidth_hz = 800e3;
  double noise_psd_w_per_hz = dbm_to_watts(-174.0);
  double slot_s = 3e-3;
  double packet_bits = 2000.0;
  double p_max_w = 2.0;
  double interference_w = 800e3 * dbm_to_watts(-174.0);  // C, defaults to W * sigma^2

  double noise_w() const { return bandwidth_hz * noise_psd_w_per_hz; }
  double interference_plus_noise_w() const { return interference_w + noise_w(); }
};

/// Throws ConfigError unless all parameters are positive and rho < phi * (ell0/2)^eta.
void validate(const PhyParams& p);

struct TrafficParams {
  double lambda_pkts_per_slot = 5.0;
  int x_max = 15;
  int r_max_global = 15;
  int a_max_slots = 100;
};

void validate(const TrafficParams& t);

class SingularGeometryError : public Error {
 public:
  using Error::Error;
};

class PowerBudgetError : public Error {
 public:
  using Error::Error;
};

/// Channel state H = psi * h(vtx, vrx) for the given link class.
double channel_gain(mobility::LinkClass link, Vec2 vtx, Vec2 vrx, const PhyParams& p);

/// Unclamped per-slot capacity in packets (floor of the Shannon bound).
int capacity_packets(double h, int f, const PhyParams& p);

/// Capacity clamped to the global departure cap.
int max_packets(double h, int f, const PhyParams& p, int r_max_global);

/// Power needed to deliver r packets within one slot on an allocated band.
double tx_power(double h, int f, int r, const PhyParams& p);

int sample_arrivals(const TrafficParams& t, Rng& rng);

int packet_drops(int x, int f, int r);

/// AoI in slots after one slot; resets to one on any delivery, saturates at a_max.
int advance_aoi(int a_slots, int f, int r, int a_max);

}  // namespace aoirrm::phy
