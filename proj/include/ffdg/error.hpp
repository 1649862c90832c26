#pragma once

#include <stdexcept>
#include <string>

namespace ffdg {

enum class errc {
  // model validation
  empty_phase_space,
  duplicate_phase_label,
  non_conservative_generator,
  negative_off_diagonal,
  not_irreducible,
  zero_first_fluid_rate,
  no_negative_first_fluid_rate,
  empty_negative_class,
  breakpoint_beyond_truncation,
  bad_truncation,
  invalid_parameter,
  non_finite_rate,
  // stencil / basis
  bad_stencil_params,
  unsupported_degree,
  misaligned_breakpoint,
  out_of_domain,
  ill_defined_eta,
  // operator assembly
  conservation_violation,
  spectrum_violation,
  zero_rho,
  singular_censored_block,
  // solvers
  no_convergence,
  non_finite_iterate,
  unstable_k,
  no_stationary_return,
  degenerate_spectrum,
  no_retained_paths,
  // cli / io
  config_error,
  io_error,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::empty_phase_space: return "EmptyPhaseSpace";
    case errc::duplicate_phase_label: return "DuplicatePhaseLabel";
    case errc::non_conservative_generator: return "NonConservativeGenerator";
    case errc::negative_off_diagonal: return "NegativeOffDiagonal";
    case errc::not_irreducible: return "NotIrreducible";
    case errc::zero_first_fluid_rate: return "ZeroFirstFluidRate";
    case errc::no_negative_first_fluid_rate: return "NoNegativeFirstFluidRate";
    case errc::empty_negative_class: return "EmptyNegativeClass";
    case errc::breakpoint_beyond_truncation: return "BreakpointBeyondTruncation";
    case errc::bad_truncation: return "BadTruncation";
    case errc::invalid_parameter: return "InvalidParameter";
    case errc::non_finite_rate: return "NonFiniteRate";
    case errc::bad_stencil_params: return "BadStencilParams";
    case errc::unsupported_degree: return "UnsupportedDegree";
    case errc::misaligned_breakpoint: return "MisalignedBreakpoint";
    case errc::out_of_domain: return "OutOfDomain";
    case errc::ill_defined_eta: return "IllDefinedEta";
    case errc::conservation_violation: return "ConservationViolation";
    case errc::spectrum_violation: return "SpectrumViolation";
    case errc::zero_rho: return "ZeroRho";
    case errc::singular_censored_block: return "SingularCensoredBlock";
    case errc::no_convergence: return "NoConvergence";
    case errc::non_finite_iterate: return "NonFiniteIterate";
    case errc::unstable_k: return "UnstableK";
    case errc::no_stationary_return: return "NoStationaryReturn";
    case errc::degenerate_spectrum: return "DegenerateSpectrum";
    case errc::no_retained_paths: return "NoRetainedPaths";
    case errc::config_error: return "ConfigError";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const { return code_; }
  const char* code_name() const { return errc_name(code_); }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace ffdg
