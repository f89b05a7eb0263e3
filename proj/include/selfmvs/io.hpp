#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "selfmvs/geometry.hpp"
#include "selfmvs/types.hpp"
#include "selfmvs/view_selection.hpp"

namespace selfmvs::io {

namespace fs = std::filesystem;

// ---- PFM (grayscale "Pf" only) -------------------------------------------
// Rows are stored bottom-up; a negative scale marks little-endian data.
// Non-finite samples become 0 (invalid) on read.
std::string encode_pfm(const Grid<double>& map);
Grid<double> decode_pfm(std::string_view bytes);
void write_pfm(const fs::path& path, const Grid<double>& map);
Grid<double> read_pfm(const fs::path& path);

// ---- MVSNet camera text ---------------------------------------------------
std::string format_camera(const Camera& cam);
// The text carries no raster size, so the caller supplies it.
Camera parse_camera(std::string_view text, ImageSize size);
void write_camera(const fs::path& path, const Camera& cam);
Camera read_camera(const fs::path& path, ImageSize size);

// ---- pair.txt ---------------------------------------------------------------
// Every view lists its sources by descending score; `max_sources` caps the
// list (0 = all positive-score sources).
std::string format_pairs(const ViewScoreMatrix& scores, int max_sources = 0);
ViewScoreMatrix parse_pairs(std::string_view text);
void write_pairs(const fs::path& path, const ViewScoreMatrix& scores, int max_sources = 0);
ViewScoreMatrix read_pairs(const fs::path& path);

// ---- Netpbm images --------------------------------------------------------
// P6 (RGB) or P5 (gray), maxval <= 255.
void write_ppm(const fs::path& path, const Image& img);
Image read_ppm(const fs::path& path);
// Mask as 8-bit PGM, 255 = true.
void write_mask_pgm(const fs::path& path, const Mask& mask);
Mask read_mask_pgm(const fs::path& path);

// ---- Anchors -----------------------------------------------------------------
// Line 1: `n_anchors n_views`; then one line per anchor: `x y z f_0 ... f_{n-1}`
// with visibility flags 0/1.
void write_anchors(const fs::path& path, const std::vector<Anchor>& anchors, int n_views);
std::vector<Anchor> read_anchors(const fs::path& path);

// ---- Directory layout -----------------------------------------------------
struct DatasetLayout {
  fs::path root;

  fs::path images_dir() const { return root / "images"; }
  fs::path depths_dir() const { return root / "depths"; }
  fs::path confidences_dir() const { return root / "confidences"; }
  fs::path masks_dir() const { return root / "masks"; }
  fs::path cams_dir() const { return root / "cams"; }
  fs::path pair_file() const { return root / "pair.txt"; }
  fs::path anchors_file() const { return root / "anchors.txt"; }

  fs::path image(int view) const;
  fs::path depth(int view) const;
  fs::path confidence(int view) const;
  fs::path mask(int view) const;
  fs::path camera(int view) const;

  // Number of consecutive camera files starting at view 0. Throws IoError
  // if the root or cams/ directory is missing.
  int count_views() const;
  void create_directories() const;
};

std::string view_name(int view);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view bytes);

}  // namespace selfmvs::io
