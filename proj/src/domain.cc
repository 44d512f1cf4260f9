#include "veltair/domain.h"

#include <algorithm>
#include <sstream>

namespace veltair {

namespace {

void check_variants(const LayerSpec& layer, std::vector<std::string>& out) {
  const std::string where = "layer " + std::to_string(layer.layer_id);
  if (layer.variants.empty()) {
    out.push_back(where + ": no variants");
    return;
  }
  for (const auto& v : layer.variants) {
    const std::string vw = where + " variant '" + v.variant_id + "'";
    if (v.block_size < 1) out.push_back(vw + ": block_size < 1");
    if (v.parallelism < 1) out.push_back(vw + ": parallelism < 1");
    if (!(v.solo_flops > 0.0)) out.push_back(vw + ": solo_flops must be positive");
    if (v.serial_fraction < 0.0 || v.serial_fraction > 1.0)
      out.push_back(vw + ": serial_fraction outside [0,1]");
    if (v.interference_sensitivity < 0.0)
      out.push_back(vw + ": negative interference_sensitivity");
    if (!(v.bandwidth_factor > 0.0)) out.push_back(vw + ": bandwidth_factor must be positive");
  }
  for (std::size_t i = 1; i < layer.variants.size(); ++i) {
    const auto& a = layer.variants[i - 1];
    const auto& b = layer.variants[i];
    if (a.block_size > b.block_size) {
      out.push_back(where + ": variants not sorted by block_size");
      break;
    }
    const bool ok = a.block_size == b.block_size
                        ? a.interference_sensitivity == b.interference_sensitivity
                        : a.interference_sensitivity < b.interference_sensitivity;
    if (!ok) {
      out.push_back(where + ": interference_sensitivity not strictly increasing in block_size");
      break;
    }
  }
}

}  // namespace

std::vector<std::string> validate_model(const ModelSpec& spec, int total_cores,
                                        std::span<const LayerBlock> blocks) {
  std::vector<std::string> out;
  if (spec.qos <= 0) out.push_back("model '" + spec.model_id + "': qos must be positive");
  if (spec.layers.empty()) out.push_back("model '" + spec.model_id + "': no layers");
  if (spec.avg_core < 1 || spec.avg_core > total_cores) {
    out.push_back("model '" + spec.model_id + "': avg_core " + std::to_string(spec.avg_core) +
                  " outside [1, " + std::to_string(total_cores) + "]");
  }

  Nanos budget_sum = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    if (layer.layer_id != i) {
      out.push_back("layer at index " + std::to_string(i) + " has layer_id " +
                    std::to_string(layer.layer_id));
    }
    if (!(layer.op_count > 0.0))
      out.push_back("layer " + std::to_string(i) + ": op_count must be positive");
    if (layer.qos_budget <= 0)
      out.push_back("layer " + std::to_string(i) + ": qos_budget must be positive");
    budget_sum += layer.qos_budget;
    check_variants(layer, out);
  }
  if (spec.qos > 0 && !spec.layers.empty()) {
    const double residual = static_cast<double>(spec.qos - budget_sum);
    if (std::abs(residual) > 1e-9 * static_cast<double>(spec.qos)) {
      std::ostringstream os;
      os << "layer budgets sum to " << to_seconds(budget_sum) << " s, qos is "
         << to_seconds(spec.qos) << " s (residual " << to_seconds(spec.qos - budget_sum)
         << " s)";
      out.push_back(os.str());
    }
  }

  if (!blocks.empty()) {
    std::vector<std::size_t> order(blocks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto& ra = blocks[a].layer_range;
      const auto& rb = blocks[b].layer_range;
      return ra.begin != rb.begin ? ra.begin < rb.begin : ra.end < rb.end;
    });
    std::size_t cursor = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const auto& blk = blocks[order[k]];
      const auto& r = blk.layer_range;
      const std::string name = "block " + std::to_string(order[k]) + " [" +
                               std::to_string(r.begin) + "," + std::to_string(r.end) + ")";
      if (r.begin >= r.end || r.end > spec.layers.size()) {
        out.push_back(name + ": empty or out of range");
        continue;
      }
      if (r.begin < cursor && k > 0) {
        const auto& prev = blocks[order[k - 1]].layer_range;
        out.push_back("blocks " + std::to_string(order[k - 1]) + " [" +
                      std::to_string(prev.begin) + "," + std::to_string(prev.end) +
                      ") and " + std::to_string(order[k]) + " [" + std::to_string(r.begin) +
                      "," + std::to_string(r.end) + ") overlap");
      } else if (r.begin > cursor) {
        out.push_back("gap before " + name + ": layers [" + std::to_string(cursor) + "," +
                      std::to_string(r.begin) + ") not covered");
      }
      cursor = std::max(cursor, r.end);
      Nanos member = 0;
      for (std::size_t l = r.begin; l < r.end; ++l) member += spec.layers[l].qos_budget;
      if (member != blk.block_qos) out.push_back(name + ": block_qos differs from member budgets");
      if (blk.core_alloc < 1) out.push_back(name + ": core_alloc < 1");
    }
    if (cursor < spec.layers.size()) {
      out.push_back("layers [" + std::to_string(cursor) + "," +
                    std::to_string(spec.layers.size()) + ") not covered by any block");
    }
  }
  return out;
}

}  // namespace veltair
