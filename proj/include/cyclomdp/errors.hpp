#pragma once

#include <stdexcept>
#include <string>

namespace cyclomdp {

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// lp_backend
struct InvalidProblem : Error { using Error::Error; };

// quantile_fourier
struct DegenerateBasis : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct EmptyRegime : Error { using Error::Error; };

// regime_model
struct UnvisitedRegime : Error { using Error::Error; };

// mdp_core
struct ModelMismatch : Error { using Error::Error; };
struct NonConvexSchedule : Error { using Error::Error; };

// chance_constraints
struct MissingAugmentation : Error { using Error::Error; };

// cvar_planner
struct BadDistribution : Error { using Error::Error; };

// simulator
struct UnclassifiableInput : Error { using Error::Error; };

// cli / config
struct ConfigError : Error { using Error::Error; };

}  // namespace cyclomdp
