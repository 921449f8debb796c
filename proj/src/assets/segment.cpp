#include <map>

#include "gsverse/assets.hpp"
#include "gsverse/error.hpp"

namespace gsverse {

SegmentResult segment_split(const GaussianCloud& cloud, const Regions& regions) {
  SegmentResult out;
  std::vector<int> owner(cloud.count, -1);

  if (const auto* boxes = std::get_if<std::vector<Aabb>>(&regions)) {
    if (boxes->empty()) throw Error(ErrorCode::EmptyRegionList, "no regions given");
    out.object_indices.resize(boxes->size());
    for (std::size_t i = 0; i < cloud.count; ++i) {
      const Eigen::Vector3f p(cloud.means[3 * i], cloud.means[3 * i + 1], cloud.means[3 * i + 2]);
      for (std::size_t b = 0; b < boxes->size(); ++b) {
        if ((*boxes)[b].contains(p)) {
          owner[i] = static_cast<int>(b);
          break;
        }
      }
    }
  } else {
    const auto& labels = std::get<LabelMap>(regions).labels;
    if (labels.empty() && cloud.count > 0) throw Error(ErrorCode::EmptyRegionList, "empty label map");
    if (labels.size() != cloud.count) {
      throw Error(ErrorCode::DimensionMismatch, "label map size differs from splat count");
    }
    std::map<std::int32_t, int> slot;
    for (auto l : labels) {
      if (l >= 0) slot.emplace(l, 0);
    }
    if (slot.empty()) throw Error(ErrorCode::EmptyRegionList, "label map has no non-negative labels");
    int next = 0;
    for (auto& [label, idx] : slot) idx = next++;
    out.object_indices.resize(slot.size());
    for (std::size_t i = 0; i < cloud.count; ++i) {
      if (labels[i] >= 0) owner[i] = slot.at(labels[i]);
    }
  }

  out.objects.resize(out.object_indices.size());
  for (auto& obj : out.objects) obj.sh_degree = cloud.sh_degree;
  out.static_cloud.sh_degree = cloud.sh_degree;
  for (std::size_t i = 0; i < cloud.count; ++i) {
    if (owner[i] < 0) {
      out.static_indices.push_back(i);
      out.static_cloud.push_from(cloud, i);
    } else {
      out.object_indices[owner[i]].push_back(i);
      out.objects[owner[i]].push_from(cloud, i);
    }
  }
  return out;
}

}  // namespace gsverse
