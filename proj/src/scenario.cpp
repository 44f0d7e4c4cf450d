#include "mcfusion/scenario.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mcfusion {

namespace {

int as_positive_int(double value, const char* what) {
  if (!(value >= 1.0) || value != std::floor(value) || value > 1e9) {
    throw std::invalid_argument(std::string(what) + " must be a positive integer");
  }
  return static_cast<int>(value);
}

}  // namespace

SensingModel SensingRecipe::build() const {
  switch (kind) {
    case Kind::Soft: return make_soft_model(levels, b0, b1);
    case Kind::Explicit: return SensingModel(g0, g1);
    case Kind::Hard: {
      const HardSensingModel hard{p0, p1};
      hard.validate();
      return hard.to_model();
    }
    case Kind::HardFromSoft: return hard_from_soft(make_soft_model(levels, b0, b1)).to_model();
  }
  throw std::logic_error("unknown sensing kind");
}

std::string_view to_string(SensingRecipe::Kind kind) {
  switch (kind) {
    case SensingRecipe::Kind::Soft: return "soft";
    case SensingRecipe::Kind::Explicit: return "explicit";
    case SensingRecipe::Kind::Hard: return "hard";
    case SensingRecipe::Kind::HardFromSoft: return "hard-from-soft";
  }
  return "?";
}

std::string_view to_string(ChannelMode mode) {
  return mode == ChannelMode::SteadyState ? "steady" : "transient";
}

ChannelParams ChannelRecipe::build() const {
  const int specified = static_cast<int>(gain.has_value()) + static_cast<int>(cir.has_value()) +
                        static_cast<int>(geometry.has_value());
  if (specified == 0) throw std::invalid_argument("channel: one of A, h or geometry is required");
  if (cir && geometry) throw std::invalid_argument("channel: h and geometry are mutually exclusive");
  if (!cir && !geometry) return ChannelParams::from_gain(*gain, noise, slots, sensors);
  std::vector<double> h = cir ? *cir : hitting_probabilities(*geometry);
  auto params = ChannelParams::from_cir(std::move(h), max_release, noise, slots, sensors);
  if (gain) params = params.with_gain(*gain);
  return params;
}

std::string_view to_string(Axis axis) {
  switch (axis) {
    case Axis::A: return "A";
    case Axis::J: return "J";
    case Axis::M: return "M";
    case Axis::N: return "N";
    case Axis::L: return "L";
    case Axis::Trials: return "trials";
  }
  return "?";
}

std::optional<Axis> parse_axis(std::string_view name) {
  for (Axis a : {Axis::A, Axis::J, Axis::M, Axis::N, Axis::L, Axis::Trials}) {
    if (name == to_string(a)) return a;
  }
  return std::nullopt;
}

Scenario with_axis(const Scenario& scenario, Axis axis, double value) {
  Scenario out = scenario;
  switch (axis) {
    case Axis::A:
      if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("A must be finite and >= 0");
      out.channel.gain = value;
      break;
    case Axis::J:
      if (!(value >= 0.0) || !std::isfinite(value)) throw std::invalid_argument("J must be finite and >= 0");
      out.channel.noise = value;
      break;
    case Axis::M: out.channel.sensors = as_positive_int(value, "M"); break;
    case Axis::N: out.channel.slots = as_positive_int(value, "N"); break;
    case Axis::L:
      if (out.sensing.kind != SensingRecipe::Kind::Soft && out.sensing.kind != SensingRecipe::Kind::HardFromSoft) {
        throw std::invalid_argument("L can only be swept for soft sensing models");
      }
      out.sensing.levels = as_positive_int(value, "L");
      break;
    case Axis::Trials: break;
  }
  return out;
}

}  // namespace mcfusion
