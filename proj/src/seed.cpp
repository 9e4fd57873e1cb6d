#include "medagi/seed.hpp"

namespace medagi {

std::vector<ExpertDescriptor> seed_experts(Timestamp created_at) {
  return {
      ExpertDescriptor{
          "pathologychat",
          "PathologyChat",
          "PathologyChat is a cutting-edge system that enables interactive, multi-round conversations "
          "about stained pathology images. Users simply upload a pathology image, ask any question about "
          "it, and PathologyChat generates informed responses.",
          "adapter://pathologychat/alignment-layer",
          std::nullopt,
          {"pathology", "histology"},
          created_at},
      ExpertDescriptor{
          "skingpt4",
          "SkinGPT-4",
          "SkinGPT is a revolutionary dermatology diagnostic system that utilizes an advanced "
          "vision-based large language model to assess skin conditions. By uploading personal skin "
          "photos to the system, users receive an autonomous analysis that can identify and categorize "
          "various skin conditions, and provide treatment recommendations.",
          "adapter://skingpt4/alignment-layer",
          std::nullopt,
          {"dermatology"},
          created_at},
      ExpertDescriptor{
          "xraychat",
          "XrayChat",
          "XrayChat is a cutting-edge system that enables interactive, multi-turn conversations about "
          "chest X-ray images. Users simply upload a chest X-ray image, ask any question about it, and "
          "XrayChat generates informed responses. The system utilizes an X-ray encoder, a large language "
          "model, and an adaptor to comprehend the X-ray image and produce accurate and helpful answers.",
          "adapter://xraychat/alignment-layer",
          std::nullopt,
          {"radiology", "chest-xray"},
          created_at},
  };
}

}  // namespace medagi
