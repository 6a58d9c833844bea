#pragma once

// Command-line entry point: bake | train | render | compare | partition |
// export-shader | tau. Exit codes: 0 ok, 1 usage or invalid input, 2 data error.
//
// Scene config for `render` (JSON; relative paths are resolved against the
// config's directory):
//   {
//     "surface": "toy.sdf",
//     "camera": {"eye": [x,y,z], "look_at": [x,y,z], "up": [x,y,z], "fov": 45, "width": 256, "height": 256},
//     "material": {"type": "diffuse" | "glossy", "albedo": [r,g,b], "exponent": 32},
//     "light": {"envmap": "sky.pfm"} | {"constant": [r,g,b]},
//     "model": "model.json",            optional
//     "clustered": "clusters.json",     optional
//     "reference": {"rays": 4096, "seed": 1},
//     "tau": {"cache": "tau.bin"} | {"samples": 262144, "seed": 1}
//   }

#include <iosfwd>
#include <string>
#include <vector>

#include "nprt/metrics.hpp"

namespace nprt {

int cli_main(int argc, const char* const* argv);
// Same, with explicit streams; args[0] is the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Field-wise mean of several reports (PSNR averaged in dB).
MetricsReport average_reports(const std::vector<MetricsReport>& reports);

}  // namespace nprt
