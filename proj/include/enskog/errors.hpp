#pragma once

#include <stdexcept>
#include <string>

namespace enskog {

struct EnskogError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidArgument : EnskogError { using EnskogError::EnskogError; };
struct NoInverse : EnskogError { using EnskogError::EnskogError; };
struct InvalidState : EnskogError { using EnskogError::EnskogError; };
struct ValidationError : EnskogError { using EnskogError::EnskogError; };

// trajectories the paper excludes as measure zero
struct ExcludedTrajectory : EnskogError { using EnskogError::EnskogError; };
struct GrazingCollision : ExcludedTrajectory { using ExcludedTrajectory::ExcludedTrajectory; };
struct SimultaneousCollision : ExcludedTrajectory { using ExcludedTrajectory::ExcludedTrajectory; };
struct CollisionCapExceeded : ExcludedTrajectory { using ExcludedTrajectory::ExcludedTrajectory; };

struct EventOrderChanged : EnskogError { using EnskogError::EnskogError; };

struct NumericalFailure : EnskogError { using EnskogError::EnskogError; };
struct BudgetExceeded : NumericalFailure { using NumericalFailure::NumericalFailure; };
struct SurvivalUnderflow : NumericalFailure { using NumericalFailure::NumericalFailure; };

}  // namespace enskog
