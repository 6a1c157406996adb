#pragma once

// JSON and CSV forms of the library types. On disk everything geometric is a
// quantized integer; floats appear only in measured quantities.

#include <string>

#include <nlohmann/json.hpp>

#include "flab/constructions.h"
#include "flab/geometry.h"
#include "flab/grid.h"
#include "flab/lab.h"
#include "flab/measures.h"
#include "flab/structure.h"

namespace flab {

using json = nlohmann::json;

// Parsers throw std::invalid_argument on malformed input.

/// {"k": int, "cells": [[i, j], ...]}
json to_json(const CellSet& e);
CellSet cellset_from_json(const json& j);

/// {"k": int, "lines": [{"chart": "s"|"t", "a_q": int, "b_q": int, "cells": [[i, j], ...]}]}
json to_json(const LineFamily& family);
LineFamily family_from_json(const json& j);

/// {exponent, constant, witness_r, witness_x}; for gamma the constant is its value.
json to_json(const NonConcentrationReport& r);
json to_json(const GammaReport& r);

json to_json(const MultiscalePartition& p);
MultiscalePartition partition_from_json(const json& j);
json to_json(const BranchingFunction& b);
json to_json(const RefinementTrace& trace);

/// Unknown keys are rejected; missing keys keep their defaults. Validation
/// failures throw std::out_of_range as ConfigSpec::validate does.
json to_json(const ConfigSpec& spec);
ConfigSpec config_from_json(const json& j);

json to_json(const TheoremReport& r);
json to_json(const SweepResult& s);

/// Fixed column order: delta,k,t,t_star,eps1,lambda,gamma_star,lhs,sum_shading,rhs_core,ratio,kt_const,te_const
std::string csv_header();
std::string csv_row(const TheoremReport& r);

/// Shortest round-trip decimal form of a double.
std::string format_double(double x);

}  // namespace flab
