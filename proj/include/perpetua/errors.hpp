#pragma once

#include <stdexcept>
#include <string>

namespace perpetua {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define PERPETUA_DEFINE_ERROR(Name)          \
    struct Name : Error {                    \
        using Error::Error;                  \
    }

PERPETUA_DEFINE_ERROR(ConcavityViolation);
PERPETUA_DEFINE_ERROR(NoAdmissibleC);
PERPETUA_DEFINE_ERROR(DivisionDegeneracy);
PERPETUA_DEFINE_ERROR(SamplerViolation);
PERPETUA_DEFINE_ERROR(UndefinedJ);
PERPETUA_DEFINE_ERROR(DegenerateBrw);
PERPETUA_DEFINE_ERROR(NotEnumerable);
PERPETUA_DEFINE_ERROR(UnboundedDensity);
PERPETUA_DEFINE_ERROR(UnsupportedConditioning);
PERPETUA_DEFINE_ERROR(UnsupportedTilting);
PERPETUA_DEFINE_ERROR(PopulationExplosion);
PERPETUA_DEFINE_ERROR(SupportExplosion);
PERPETUA_DEFINE_ERROR(BadEta);
PERPETUA_DEFINE_ERROR(NonConvergent);
PERPETUA_DEFINE_ERROR(ConfigError);
PERPETUA_DEFINE_ERROR(IncompatibleExperiment);

#undef PERPETUA_DEFINE_ERROR

}  // namespace perpetua
