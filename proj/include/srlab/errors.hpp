#pragma once

#include <stdexcept>
#include <string>

namespace srlab {

// Every contract violation surfaces as a typed exception so callers can
// distinguish "bad input" from "no usable result". All of them carry a
// human-readable message; none of them carry recovery state.

#define SRLAB_DEFINE_ERROR(Name)                              \
  struct Name : std::runtime_error {                          \
    explicit Name(const std::string& what)                    \
        : std::runtime_error(std::string(#Name ": ") + what) {} \
  }

SRLAB_DEFINE_ERROR(UnknownToken);          // token text not in the vocabulary
SRLAB_DEFINE_ERROR(MalformedSequence);     // prefix sequence fails the arity rule
SRLAB_DEFINE_ERROR(IrreducibleConstant);   // constant outside the injection grammar
SRLAB_DEFINE_ERROR(PlaceholderPresent);    // evaluation requires concrete constants
SRLAB_DEFINE_ERROR(SupportIncompatible);   // resample budget exhausted on a support
SRLAB_DEFINE_ERROR(AttemptCeiling);        // generation loop gave up
SRLAB_DEFINE_ERROR(NonFiniteEverywhere);   // every fit start produced non-finite loss
SRLAB_DEFINE_ERROR(DegenerateTarget);      // zero-variance targets
SRLAB_DEFINE_ERROR(IllegalPrefix);         // policy queried with an invalid prefix
SRLAB_DEFINE_ERROR(NoFiniteCandidate);     // decoder found nothing rankable
SRLAB_DEFINE_ERROR(ProtocolError);         // malformed wire message
SRLAB_DEFINE_ERROR(TimeoutError);          // external endpoint did not answer in time
SRLAB_DEFINE_ERROR(NonDistributionResponse); // wire probabilities do not normalize
SRLAB_DEFINE_ERROR(LengthMismatch);        // audited lists are not aligned
SRLAB_DEFINE_ERROR(OrPresent);             // boolean encoder requires an or-free formula

#undef SRLAB_DEFINE_ERROR

}  // namespace srlab
