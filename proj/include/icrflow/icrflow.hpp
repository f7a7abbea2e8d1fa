#pragma once

/// Umbrella header for the icrflow library: a 2D mixed finite element solver
/// for steady incompressible flow with the implicit constitutive relation
/// D(u) = alpha T^d + gamma mu(|T^d|) T^d on Q2/Q2/Q1 square-element meshes.

#include "icrflow/tensor.hpp"
#include "icrflow/mesh.hpp"
#include "icrflow/basis.hpp"
#include "icrflow/spaces.hpp"
#include "icrflow/sparse.hpp"
#include "icrflow/solvers.hpp"
#include "icrflow/constitutive.hpp"
#include "icrflow/manufactured.hpp"
#include "icrflow/assembly.hpp"
#include "icrflow/norms.hpp"
#include "icrflow/flow.hpp"
#include "icrflow/study.hpp"
