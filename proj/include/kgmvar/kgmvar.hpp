#pragma once

#include "kgmvar/commands.hpp"
#include "kgmvar/config.hpp"
#include "kgmvar/domain.hpp"
#include "kgmvar/elliptic.hpp"
#include "kgmvar/errors.hpp"
#include "kgmvar/field_io.hpp"
#include "kgmvar/functional.hpp"
#include "kgmvar/harness.hpp"
#include "kgmvar/optimize.hpp"
#include "kgmvar/params.hpp"
#include "kgmvar/reduction.hpp"
#include "kgmvar/sparse.hpp"
#include "kgmvar/spectrum.hpp"
