#include "selfmvs/fusion.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

namespace selfmvs {

PointCloud fuse(std::span<const FusionView> views, const FusionConfig& cfg) {
  const int n = static_cast<int>(views.size());
  SELFMVS_CHECK(n >= 2, "fuse: at least two views required");
  SELFMVS_CHECK(cfg.geometry.tau2 > 0.0 && cfg.geometry.tau3 > 0.0 && cfg.geometry.tau4 >= 1,
                "fuse: invalid geometric thresholds");
  for (int v = 0; v < n; ++v) {
    const auto& fv = views[v];
    SELFMVS_CHECK(size_of(fv.depth) == fv.camera.image_size() &&
                      size_of(fv.confidence) == fv.camera.image_size() &&
                      fv.image.size() == fv.camera.image_size(),
                  "fuse: view " + std::to_string(v) + " has inconsistent raster sizes");
    for (int s : fv.sources) {
      SELFMVS_CHECK(s >= 0 && s < n && s != v,
                    "fuse: view " + std::to_string(v) + " lists invalid source " +
                        std::to_string(s));
    }
  }

  SELFMVS_CHECK(cfg.dedup_pixel > 0.0 && cfg.dedup_depth > 0.0,
                "fuse: dedup tolerances must be positive");

  PointCloud cloud;
  for (int v = 0; v < n; ++v) {
    const FusionView& ref = views[v];
    std::vector<int> sources = ref.sources;
    if (sources.empty()) {
      for (int s = 0; s < n; ++s) {
        if (s != v) sources.push_back(s);
      }
    }
    SELFMVS_CHECK(cfg.geometry.tau4 <= static_cast<int>(sources.size()),
                  "fuse: tau4 exceeds the number of sources of view " + std::to_string(v));
    std::vector<ReprojectionErrors> checks;
    for (int s : sources) {
      checks.push_back(reprojection_errors(ref.depth, views[s].depth, ref.camera, views[s].camera));
    }
    const int H = ref.camera.height();
    const int W = ref.camera.width();
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const double d = ref.depth(r, c);
        if (!is_valid_depth(d)) continue;
        bool owned_earlier = false;
        for (std::size_t k = 0; k < checks.size() && !owned_earlier; ++k) {
          const auto& e = checks[k];
          owned_earlier = sources[k] < v && e.defined(r, c) && e.e_pixel(r, c) < cfg.dedup_pixel &&
                          e.e_depth(r, c) < cfg.dedup_depth;
        }
        if (owned_earlier || !(ref.confidence(r, c) > cfg.conf_threshold)) continue;
        int passing = 0;
        double depth_sum = d;
        for (const auto& e : checks) {
          if (e.defined(r, c) && e.e_pixel(r, c) < cfg.geometry.tau2 &&
              e.e_depth(r, c) < cfg.geometry.tau3) {
            ++passing;
            depth_sum += e.reprojected_depth(r, c);
          }
        }
        if (passing < cfg.geometry.tau4) continue;
        const double fused_depth = depth_sum / (passing + 1);
        PointCloud::Point pt;
        pt.position = backproject(Pixel(c, r), fused_depth, ref.camera);
        for (int ch = 0; ch < 3; ++ch) {
          pt.color[ch] = ref.image[std::min(ch, ref.image.num_channels() - 1)](r, c);
        }
        pt.view = v;
        cloud.points.push_back(pt);
      }
    }
  }
  return cloud;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "ply\n"
      << "format binary_little_endian 1.0\n"
      << "element vertex " << cloud.points.size() << "\n"
      << "property float x\n"
      << "property float y\n"
      << "property float z\n"
      << "property uchar red\n"
      << "property uchar green\n"
      << "property uchar blue\n"
      << "end_header\n";
  for (const auto& p : cloud.points) {
    char record[15];
    for (int i = 0; i < 3; ++i) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(p.position[i]));
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      std::memcpy(record + 4 * i, &bits, 4);
    }
    for (int i = 0; i < 3; ++i) {
      const double c = std::clamp(p.color[i], 0.0, 1.0);
      record[12 + i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(c * 255.0)));
    }
    out.write(record, sizeof(record));
  }
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace selfmvs
