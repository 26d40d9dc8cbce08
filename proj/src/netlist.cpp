#include "pgplan/netlist.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "pgplan/error.hpp"
#include "pgplan/util.hpp"

namespace pgplan::netlist {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t start = i;
    while (i < line.size() &&
           !std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_nonneg_ll(std::string_view s, long long& v) {
  if (s.empty()) return false;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  return res.ec == std::errc() && res.ptr == s.data() + s.size() && v >= 0;
}

class Builder {
 public:
  int node_id(std::string_view name_sv) {
    std::string name(name_sv);
    auto it = net_.name_to_id.find(name);
    if (it != net_.name_to_id.end()) return it->second;
    NodeRef n;
    n.id = static_cast<int>(net_.nodes.size());
    n.name = name;
    n.is_ground = (name == "0");
    if (n.is_ground) net_.ground_id = n.id;
    n.has_coords = parse_node_coordinates(name, n.layer, n.x, n.y);
    net_.name_to_id.emplace(name, n.id);
    net_.nodes.push_back(std::move(n));
    return net_.nodes.back().id;
  }

  void unique_element_name(const std::string& name, int line_no) {
    if (!element_names_.insert(name).second) {
      throw Error(ErrorCode::DuplicateElementName,
                  "element '" + name + "' redefined at line " +
                      std::to_string(line_no));
    }
  }

  PowerGridNetlist net_;
  std::unordered_map<int, int> pad_by_node_;
  std::unordered_set<std::string> element_names_;
};

}  // namespace

bool parse_node_coordinates(const std::string& name, int& layer, long long& x,
                            long long& y) {
  if (name.size() < 6 || (name[0] != 'n' && name[0] != 'N')) return false;
  std::size_t u1 = name.find('_', 1);
  if (u1 == std::string::npos) return false;
  std::size_t u2 = name.find('_', u1 + 1);
  if (u2 == std::string::npos) return false;
  long long l = 0, xi = 0, yi = 0;
  if (!parse_nonneg_ll(std::string_view(name).substr(1, u1 - 1), l))
    return false;
  if (!parse_nonneg_ll(std::string_view(name).substr(u1 + 1, u2 - u1 - 1), xi))
    return false;
  if (!parse_nonneg_ll(std::string_view(name).substr(u2 + 1), yi))
    return false;
  layer = static_cast<int>(l);
  x = xi;
  y = yi;
  return true;
}

PowerGridNetlist parse_netlist(std::istream& in) {
  Builder b;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    char head = tok[0].front();
    if (head == '*') continue;                     // comment
    if (head == '.') continue;                     // directive (.op, .end)
    char kind = static_cast<char>(std::toupper(static_cast<unsigned char>(head)));
    if (kind != 'R' && kind != 'V' && kind != 'I') {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": unknown element '" +
                      std::string(tok[0]) + "'");
    }
    if (tok.size() != 4) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    auto value = parse_double(tok[3]);
    if (!value || !std::isfinite(*value)) {
      throw Error(ErrorCode::MalformedLine,
                  "line " + std::to_string(line_no) + ": bad value '" +
                      std::string(tok[3]) + "'");
    }
    std::string name(tok[0]);
    b.unique_element_name(name, line_no);
    int na = b.node_id(tok[1]);
    int nb = b.node_id(tok[2]);
    if (kind == 'R') {
      if (*value < 0.0) {
        throw Error(ErrorCode::MalformedLine,
                    "line " + std::to_string(line_no) +
                        ": negative resistance");
      }
      if (na == nb) {
        throw Error(ErrorCode::MalformedLine,
                    "line " + std::to_string(line_no) +
                        ": resistor joins a node to itself");
      }
      ResistorBranch r;
      r.a = na;
      r.b = nb;
      r.resistance = *value;
      r.name = std::move(name);
      r.shorted = r.resistance < kShortThresholdOhms;
      b.net_.resistors.push_back(std::move(r));
    } else if (kind == 'V') {
      if (*value < 0.0) {
        throw Error(ErrorCode::MalformedLine,
                    "line " + std::to_string(line_no) + ": negative voltage");
      }
      bool ga = b.net_.nodes[static_cast<size_t>(na)].is_ground;
      bool gb = b.net_.nodes[static_cast<size_t>(nb)].is_ground;
      if (ga == gb) {
        throw Error(ErrorCode::DanglingNode,
                    "line " + std::to_string(line_no) +
                        ": pad must connect one node to ground");
      }
      VoltagePad p;
      p.node = ga ? nb : na;
      p.reference = ga ? na : nb;
      p.volts = *value;
      p.name = std::move(name);
      auto [it, inserted] = b.pad_by_node_.emplace(p.node, 1);
      if (!inserted) {
        throw Error(ErrorCode::DuplicateElementName,
                    "line " + std::to_string(line_no) + ": node '" +
                        b.net_.nodes[static_cast<size_t>(p.node)].name +
                        "' already carries a pad");
      }
      b.net_.pads.push_back(std::move(p));
    } else {
      if (*value < 0.0) {
        throw Error(ErrorCode::MalformedLine,
                    "line " + std::to_string(line_no) + ": negative load");
      }
      bool ga = b.net_.nodes[static_cast<size_t>(na)].is_ground;
      bool gb = b.net_.nodes[static_cast<size_t>(nb)].is_ground;
      if (ga == gb) {
        throw Error(ErrorCode::DanglingNode,
                    "line " + std::to_string(line_no) +
                        ": load must connect one node to ground");
      }
      CurrentLoad l;
      l.node = ga ? nb : na;
      l.reference = ga ? na : nb;
      l.amps = *value;
      l.name = std::move(name);
      b.net_.loads.push_back(std::move(l));
    }
  }
  if (b.net_.ground_id < 0) {
    throw Error(ErrorCode::MissingGround, "no ground node '0' in file");
  }
  for (const VoltagePad& p : b.net_.pads) {
    if (p.volts > b.net_.vdd_nominal) b.net_.vdd_nominal = p.volts;
  }
  return std::move(b.net_);
}

PowerGridNetlist parse_netlist_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  return parse_netlist(in);
}

int PowerGridNetlist::find_node(const std::string& name) const {
  auto it = name_to_id.find(name);
  return it == name_to_id.end() ? -1 : it->second;
}

void write_netlist(const PowerGridNetlist& net, std::ostream& out) {
  for (const ResistorBranch& r : net.resistors) {
    out << r.name << ' ' << net.node(r.a).name << ' ' << net.node(r.b).name
        << ' ' << fmt_double(r.resistance) << '\n';
  }
  for (const VoltagePad& p : net.pads) {
    out << p.name << ' ' << net.node(p.node).name << ' '
        << net.node(p.reference).name << ' ' << fmt_double(p.volts) << '\n';
  }
  for (const CurrentLoad& l : net.loads) {
    out << l.name << ' ' << net.node(l.node).name << ' '
        << net.node(l.reference).name << ' ' << fmt_double(l.amps) << '\n';
  }
  out << ".end\n";
}

void write_netlist_file(const PowerGridNetlist& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  write_netlist(net, out);
}

bool netlists_equal(const PowerGridNetlist& a, const PowerGridNetlist& b) {
  if (a.resistors.size() != b.resistors.size() ||
      a.pads.size() != b.pads.size() || a.loads.size() != b.loads.size() ||
      a.nodes.size() != b.nodes.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.resistors.size(); ++i) {
    const auto& ra = a.resistors[i];
    const auto& rb = b.resistors[i];
    if (ra.name != rb.name || ra.resistance != rb.resistance ||
        a.node(ra.a).name != b.node(rb.a).name ||
        a.node(ra.b).name != b.node(rb.b).name) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.pads.size(); ++i) {
    const auto& pa = a.pads[i];
    const auto& pb = b.pads[i];
    if (pa.name != pb.name || pa.volts != pb.volts ||
        a.node(pa.node).name != b.node(pb.node).name) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.loads.size(); ++i) {
    const auto& la = a.loads[i];
    const auto& lb = b.loads[i];
    if (la.name != lb.name || la.amps != lb.amps ||
        a.node(la.node).name != b.node(lb.node).name) {
      return false;
    }
  }
  return true;
}

}  // namespace pgplan::netlist
