#pragma once

#include <json.hpp>

#include "topoforge/fem.hpp"
#include "topoforge/problem.hpp"

namespace topoforge {

/// {grid:{nelx,nely}, domain:[[start,count],...], loads:[{x,y,magnitude,angle_deg}],
///  fixings:[{x,y,kind}], volume_fraction, mask:[[start,count],...]|null}
nlohmann::json problem_to_json(const DesignProblem& problem);
DesignProblem problem_from_json(const nlohmann::json& j);

nlohmann::json palette_to_json(const Palette& palette);

/// {nelx, nely, rho:[...]} with rows top to bottom.
nlohmann::json density_to_json(const DensityField& field);

}  // namespace topoforge
