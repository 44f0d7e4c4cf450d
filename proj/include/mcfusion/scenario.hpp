#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "mcfusion/channel.hpp"
#include "mcfusion/sensing.hpp"

namespace mcfusion {

/// How the sensing distributions are specified.
struct SensingRecipe {
  enum class Kind { Soft, Explicit, Hard, HardFromSoft };

  Kind kind = Kind::Soft;
  int levels = 4;       // Soft and HardFromSoft
  double b0 = -2.5;
  double b1 = 3.5;
  std::vector<double> g0;  // Explicit
  std::vector<double> g1;
  double p0 = 0.1;      // Hard
  double p1 = 0.1;

  SensingModel build() const;
};

std::string_view to_string(SensingRecipe::Kind kind);

enum class ChannelMode { SteadyState, Transient };
std::string_view to_string(ChannelMode mode);

/// Reporting channel: either a direct gain A, an explicit CIR with Amax,
/// or a diffusion geometry with Amax.
struct ChannelRecipe {
  std::optional<double> gain;
  std::optional<std::vector<double>> cir;
  std::optional<DiffusionGeometry> geometry;
  double max_release = 0.0;
  double noise = 4.0;
  int slots = 1;
  int sensors = 2;
  ChannelMode mode = ChannelMode::SteadyState;

  ChannelParams build() const;
};

struct Scenario {
  SensingRecipe sensing;
  ChannelRecipe channel;

  SensingModel model() const { return sensing.build(); }
  ChannelParams params() const { return channel.build(); }
};

/// Parameters a sweep can vary.
enum class Axis { A, J, M, N, L, Trials };
std::string_view to_string(Axis axis);
std::optional<Axis> parse_axis(std::string_view name);

/// Copy of the scenario with one parameter replaced. Setting A on a CIR or
/// geometry channel rescales Amax so the effective gain becomes A. Trials
/// is not a scenario parameter and leaves it unchanged.
Scenario with_axis(const Scenario& scenario, Axis axis, double value);

}  // namespace mcfusion
