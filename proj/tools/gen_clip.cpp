// Regenerates the bundled demonstration kick clip (CSV + JSON sidecar).
// The clip builder is shared with the test suite so the committed assets
// and the test fixtures can never drift apart.

#include <fstream>
#include <iostream>
#include <string>

#include "support/synthetic_clip.hpp"

int main(int argc, char** argv) {
  const std::string stem = argc > 1 ? argv[1] : "clips/synthetic_kick";
  const kickplan::MocapClip clip = kickplan::testing::synthetic_kick_clip();
  {
    std::ofstream csv(stem + ".csv");
    if (!csv) {
      std::cerr << "cannot write " << stem << ".csv\n";
      return 1;
    }
    kickplan::write_clip_csv(clip, csv);
  }
  {
    std::ofstream sidecar(stem + ".json");
    sidecar << kickplan::clip_sidecar_json(clip).dump(2) << "\n";
  }
  std::cout << "wrote " << stem << ".csv and " << stem << ".json ("
            << clip.num_frames() << " frames @ " << clip.rate << " Hz)\n";
  return 0;
}
