#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "stg/graph.hpp"

namespace stg {

/// Malformed or incompatible input file. `line` is 1-based, 0 when the
/// error is not tied to a line.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline constexpr int kVideoGraphFormatVersion = 1;

struct FrameReadOptions {
  // 0 infers the dimension from the first feature seen.
  int feature_dim = 0;
  int num_object_classes = 0;
  int num_spatial_relations = 0;
  // When set, boxes are read as pixel coordinates and divided by these.
  std::optional<double> image_width;
  std::optional<double> image_height;
};

std::vector<FrameGraph> read_frame_graphs(std::istream& in, const FrameReadOptions& options = {});
std::vector<FrameGraph> read_frame_graphs_file(const std::string& path, const FrameReadOptions& options = {});
void write_frame_graphs(const std::vector<FrameGraph>& frames, std::ostream& out);

/// `config`, when not null, is embedded as an informational echo and ignored
/// on read.
void write_video_graph(const VideoGraph& graph, std::ostream& out, const nlohmann::json& config = nullptr);
VideoGraph read_video_graph(std::istream& in);
VideoGraph read_video_graph_file(const std::string& path);

/// Graphviz document; nodes named f<frame>_n<index>, edges colored by relation.
std::string export_dot(const VideoGraph& graph);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace stg
