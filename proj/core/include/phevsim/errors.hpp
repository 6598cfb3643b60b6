#pragma once

#include <stdexcept>
#include <string>

namespace phevsim {

/// Base class for all model errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input files or configuration that cannot be parsed or fail validation.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// Numerical or model-state failures at runtime (infeasible assignments,
/// solver non-convergence, envelope violations).
class ModelError : public Error {
public:
    using Error::Error;
};

#define PHEVSIM_DEFINE_ERROR(Name, Base)                  \
    class Name : public Base {                            \
    public:                                               \
        using Base::Base;                                 \
    }

// corridor
PHEVSIM_DEFINE_ERROR(OverlappingZones, InvalidInput);
PHEVSIM_DEFINE_ERROR(ZoneOutOfBounds, InvalidInput);
PHEVSIM_DEFINE_ERROR(BadLimits, InvalidInput);
PHEVSIM_DEFINE_ERROR(PositionOutOfRange, ModelError);
PHEVSIM_DEFINE_ERROR(NegativeSpeed, ModelError);

// vd-controller
PHEVSIM_DEFINE_ERROR(OutOfOrderArrival, ModelError);
PHEVSIM_DEFINE_ERROR(PredecessorUnassigned, ModelError);
PHEVSIM_DEFINE_ERROR(ZeroPredecessorSpeed, ModelError);
PHEVSIM_DEFINE_ERROR(SingularSystem, ModelError);
PHEVSIM_DEFINE_ERROR(Infeasible, ModelError);
PHEVSIM_DEFINE_ERROR(NoConvergence, ModelError);
PHEVSIM_DEFINE_ERROR(TimeOutOfRange, ModelError);
PHEVSIM_DEFINE_ERROR(DisjointTimeSpans, ModelError);

// baseline-driver
PHEVSIM_DEFINE_ERROR(LeaderBehindFollower, ModelError);

// powertrain
PHEVSIM_DEFINE_ERROR(NoFeasibleGear, ModelError);
PHEVSIM_DEFINE_ERROR(OutsideEnvelope, ModelError);
PHEVSIM_DEFINE_ERROR(PowerLimitExceeded, ModelError);
PHEVSIM_DEFINE_ERROR(ZeroConsumption, ModelError);
PHEVSIM_DEFINE_ERROR(BadSpec, InvalidInput);
PHEVSIM_DEFINE_ERROR(DemandExceedsCapability, ModelError);

// pareto
PHEVSIM_DEFINE_ERROR(EmptyFeasibleSet, ModelError);
PHEVSIM_DEFINE_ERROR(OutOfRange, ModelError);
PHEVSIM_DEFINE_ERROR(InfeasibleCell, ModelError);

// sim-engine
PHEVSIM_DEFINE_ERROR(ParetoTableMissing, InvalidInput);
PHEVSIM_DEFINE_ERROR(InfeasibleAssignment, ModelError);
PHEVSIM_DEFINE_ERROR(TrackingDiverged, ModelError);
PHEVSIM_DEFINE_ERROR(EmptyRecords, ModelError);

#undef PHEVSIM_DEFINE_ERROR

}  // namespace phevsim
