#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace pgplan::netlist {

struct NodeRef {
  int id = -1;
  std::string name;
  int layer = -1;
  long long x = 0;
  long long y = 0;
  bool has_coords = false;
  bool is_ground = false;
};

struct ResistorBranch {
  int a = -1;  // node ids as written in the file
  int b = -1;
  double resistance = 0.0;
  std::string name;
  bool shorted = false;  // below the short-merge threshold
};

struct VoltagePad {
  int node = -1;
  int reference = -1;  // ground
  double volts = 0.0;
  std::string name;
};

struct CurrentLoad {
  int node = -1;
  int reference = -1;  // ground
  double amps = 0.0;   // current drawn from the grid
  std::string name;
};

struct PowerGridNetlist {
  std::vector<NodeRef> nodes;
  std::vector<ResistorBranch> resistors;
  std::vector<VoltagePad> pads;
  std::vector<CurrentLoad> loads;
  double vdd_nominal = 0.0;  // max pad voltage
  int ground_id = -1;

  // Summary counts; the node count excludes the ground node.
  std::size_t count_nodes() const {
    return nodes.empty() ? 0 : nodes.size() - (ground_id >= 0 ? 1 : 0);
  }
  std::size_t count_resistors() const { return resistors.size(); }
  std::size_t count_pads() const { return pads.size(); }
  std::size_t count_loads() const { return loads.size(); }

  const NodeRef& node(int id) const { return nodes[static_cast<size_t>(id)]; }
  int find_node(const std::string& name) const;

  std::unordered_map<std::string, int> name_to_id;
};

// Threshold below which a resistor is treated as a short (node merge at
// assembly time).
inline constexpr double kShortThresholdOhms = 1e-6;

PowerGridNetlist parse_netlist(std::istream& in);
PowerGridNetlist parse_netlist_file(const std::string& path);

void write_netlist(const PowerGridNetlist& net, std::ostream& out);
void write_netlist_file(const PowerGridNetlist& net, const std::string& path);

// Structural equality on names/values/order (node ids may differ between two
// independently parsed files; comparison is by name).
bool netlists_equal(const PowerGridNetlist& a, const PowerGridNetlist& b);

// Parses the `n<layer>_<x>_<y>` convention; returns false when the name does
// not match.
bool parse_node_coordinates(const std::string& name, int& layer, long long& x,
                            long long& y);

}  // namespace pgplan::netlist
