#include "ctap/network.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>

#include "ctap/error.hpp"

namespace ctap {

Network::Network(int node_count, std::vector<Link> links)
    : node_count_(node_count), links_(std::move(links)) {
  if (node_count_ < 0) throw InputError("negative node count");
  adjacency_.resize(static_cast<std::size_t>(node_count_));
  for (std::size_t i = 0; i < links_.size(); ++i) {
    Link& l = links_[i];
    l.id = static_cast<LinkId>(i);
    if (l.tail < 0 || l.tail >= node_count_ || l.head < 0 || l.head >= node_count_)
      throw InputError("link " + std::to_string(i) + " references a node outside 1.." +
                       std::to_string(node_count_));
    adjacency_[static_cast<std::size_t>(l.tail)].push_back(l.id);
  }
}

double DemandTable::total() const {
  double sum = 0.0;
  for (const auto& od : od_pairs) sum += od.demand;
  return sum;
}

namespace {

struct Line {
  int number;
  std::string_view text;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  int number = 1;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({number++, line});
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<long> to_integer(std::string_view s) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool is_comment_or_blank(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '~';
}

// Reads "<KEY> value" lines up to <END OF METADATA>. Returns the index of the
// first body line.
std::size_t read_metadata(const std::vector<Line>& lines, std::map<std::string, std::pair<int, std::string>>& meta) {
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = trim(lines[i].text);
    if (is_comment_or_blank(line)) continue;
    if (line.front() != '<')
      throw ParseError(lines[i].number, "malformed header: expected <KEY> metadata line");
    const auto close = line.find('>');
    if (close == std::string_view::npos)
      throw ParseError(lines[i].number, "malformed header: unterminated metadata key");
    std::string key(trim(line.substr(1, close - 1)));
    if (key == "END OF METADATA") return i + 1;
    meta[key] = {lines[i].number, std::string(trim(line.substr(close + 1)))};
  }
  throw ParseError(lines.empty() ? 1 : lines.back().number, "malformed header: missing <END OF METADATA>");
}

long required_count(const std::map<std::string, std::pair<int, std::string>>& meta,
                    const std::string& key, int fallback_line) {
  auto it = meta.find(key);
  if (it == meta.end()) throw ParseError(fallback_line, "malformed header: missing <" + key + ">");
  auto v = to_integer(it->second.second);
  if (!v || *v < 0) throw ParseError(it->second.first, "malformed header: <" + key + "> is not a count");
  return *v;
}

// Shortest text that parses back to the same double.
std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

Network parse_network(std::string_view text) {
  const auto lines = split_lines(text);
  std::map<std::string, std::pair<int, std::string>> meta;
  const std::size_t body = read_metadata(lines, meta);
  const int header_end_line = body > 0 ? lines[body - 1].number : 1;
  const long node_count = required_count(meta, "NUMBER OF NODES", header_end_line);
  const long declared_links = required_count(meta, "NUMBER OF LINKS", header_end_line);

  std::vector<Link> links;
  for (std::size_t i = body; i < lines.size(); ++i) {
    const Line& line = lines[i];
    if (is_comment_or_blank(line.text)) continue;
    auto toks = tokens(line.text);
    // Row terminator may be a separate ';' token or glued to the last field.
    while (!toks.empty() && toks.back() == ";") toks.pop_back();
    if (!toks.empty() && toks.back().ends_with(';')) toks.back().remove_suffix(1);
    if (toks.size() != 10)
      throw ParseError(line.number, "wrong field count: expected 10, got " + std::to_string(toks.size()));
    double f[10];
    for (int k = 0; k < 10; ++k) {
      auto v = to_double(toks[static_cast<std::size_t>(k)]);
      if (!v) throw ParseError(line.number, "non-numeric field '" + std::string(toks[static_cast<std::size_t>(k)]) + "'");
      f[k] = *v;
    }
    if (f[0] != std::floor(f[0]) || f[1] != std::floor(f[1]))
      throw ParseError(line.number, "non-integer node id");
    const long tail = static_cast<long>(f[0]);
    const long head = static_cast<long>(f[1]);
    if (tail < 1 || tail > node_count || head < 1 || head > node_count)
      throw ParseError(line.number, "node id outside 1.." + std::to_string(node_count));
    if (tail == head) throw ParseError(line.number, "self-loop link");
    Link l;
    l.tail = static_cast<NodeId>(tail - 1);
    l.head = static_cast<NodeId>(head - 1);
    l.capacity = f[2];
    l.length = f[3];
    l.free_flow_time = f[4];
    l.bpr_alpha = f[5];
    l.bpr_power = f[6];
    if (!(l.capacity > 0.0)) throw ParseError(line.number, "capacity must be positive");
    if (l.free_flow_time < 0.0) throw ParseError(line.number, "negative free flow time");
    if (l.bpr_power < 1.0) throw ParseError(line.number, "BPR power must be >= 1");
    if (l.bpr_alpha < 0.0) throw ParseError(line.number, "negative BPR alpha");
    links.push_back(l);
  }
  if (static_cast<long>(links.size()) != declared_links) {
    throw ParseError(lines.back().number, "count mismatch: <NUMBER OF LINKS> " + std::to_string(declared_links) +
                                              " but " + std::to_string(links.size()) + " link rows");
  }
  return Network(static_cast<int>(node_count), std::move(links));
}

DemandTable parse_trips(std::string_view text) {
  const auto lines = split_lines(text);
  std::map<std::string, std::pair<int, std::string>> meta;
  const std::size_t body = read_metadata(lines, meta);
  const int header_end_line = body > 0 ? lines[body - 1].number : 1;
  const long zones = required_count(meta, "NUMBER OF ZONES", header_end_line);

  DemandTable table;
  table.zone_count = static_cast<int>(zones);
  std::set<std::pair<int, int>> seen;
  std::optional<long> origin;

  auto check_zone = [&](long id, int line) {
    if (id < 1 || id > zones) throw ParseError(line, "zone id " + std::to_string(id) + " outside 1.." + std::to_string(zones));
  };

  for (std::size_t i = body; i < lines.size(); ++i) {
    const Line& line = lines[i];
    if (is_comment_or_blank(line.text)) continue;
    std::string_view content = trim(line.text);
    if (content.starts_with("Origin")) {
      auto toks = tokens(content);
      if (toks.size() != 2) throw ParseError(line.number, "malformed Origin block header");
      auto id = to_integer(toks[1]);
      if (!id) throw ParseError(line.number, "malformed Origin block: non-integer origin");
      check_zone(*id, line.number);
      origin = *id;
      continue;
    }
    if (!origin) throw ParseError(line.number, "malformed Origin block: entry before any Origin line");
    std::size_t pos = 0;
    while (pos < content.size()) {
      std::size_t semi = content.find(';', pos);
      std::string_view entry = trim(content.substr(pos, semi == std::string_view::npos ? std::string_view::npos : semi - pos));
      pos = semi == std::string_view::npos ? content.size() : semi + 1;
      if (entry.empty()) continue;
      const auto colon = entry.find(':');
      if (colon == std::string_view::npos)
        throw ParseError(line.number, "destination without demand: '" + std::string(entry) + "'");
      auto dest = to_integer(trim(entry.substr(0, colon)));
      std::string_view flow_text = trim(entry.substr(colon + 1));
      if (!dest) throw ParseError(line.number, "non-integer destination '" + std::string(entry) + "'");
      if (flow_text.empty()) throw ParseError(line.number, "destination without demand: '" + std::string(entry) + "'");
      auto flow = to_double(flow_text);
      if (!flow) throw ParseError(line.number, "non-numeric demand '" + std::string(flow_text) + "'");
      if (*flow < 0.0) throw ParseError(line.number, "negative demand");
      check_zone(*dest, line.number);
      if (*flow == 0.0) continue;
      if (*dest == *origin) throw ParseError(line.number, "nonzero intra-zonal demand");
      const std::pair<int, int> key{static_cast<int>(*origin - 1), static_cast<int>(*dest - 1)};
      if (!seen.insert(key).second) throw ParseError(line.number, "duplicate OD pair");
      table.od_pairs.push_back({key.first, key.second, *flow});
    }
  }
  return table;
}

std::string write_network(const Network& net) {
  std::ostringstream out;
  out << "<NUMBER OF ZONES> " << net.node_count() << "\n";
  out << "<NUMBER OF NODES> " << net.node_count() << "\n";
  out << "<FIRST THRU NODE> 1\n";
  out << "<NUMBER OF LINKS> " << net.link_count() << "\n";
  out << "<END OF METADATA>\n\n";
  out << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n";
  for (const Link& l : net.links()) {
    out << '\t' << l.tail + 1 << '\t' << l.head + 1 << '\t' << format_number(l.capacity) << '\t'
        << format_number(l.length) << '\t' << format_number(l.free_flow_time) << '\t'
        << format_number(l.bpr_alpha) << '\t' << format_number(l.bpr_power) << "\t0\t0\t1\t;\n";
  }
  return out.str();
}

std::string write_trips(const DemandTable& demand) {
  std::ostringstream out;
  out << "<NUMBER OF ZONES> " << demand.zone_count << "\n";
  out << "<TOTAL OD FLOW> " << format_number(demand.total()) << "\n";
  out << "<END OF METADATA>\n\n";
  std::optional<int> origin;
  for (const OdPair& od : demand.od_pairs) {
    if (!origin || *origin != od.origin) {
      origin = od.origin;
      out << "\nOrigin " << od.origin + 1 << "\n";
    }
    out << "    " << od.destination + 1 << " : " << format_number(od.demand) << ";\n";
  }
  return out.str();
}

namespace {
std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}
}  // namespace

Network load_network(const std::string& path) {
  try {
    return parse_network(read_file(path));
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

DemandTable load_trips(const std::string& path) {
  try {
    return parse_trips(read_file(path));
  } catch (const ParseError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<std::string> validate_network(const Network& net, const DemandTable& demand) {
  std::vector<std::string> diagnostics;
  std::map<NodeId, std::vector<char>> reach_cache;
  const auto n = static_cast<std::size_t>(net.node_count());
  for (const OdPair& od : demand.od_pairs) {
    if (od.origin < 0 || static_cast<std::size_t>(od.origin) >= n || od.destination < 0 ||
        static_cast<std::size_t>(od.destination) >= n) {
      diagnostics.push_back("unreachable: OD (" + std::to_string(od.origin + 1) + "," +
                            std::to_string(od.destination + 1) + ") references a node outside the network");
      continue;
    }
    auto [it, inserted] = reach_cache.try_emplace(od.origin);
    if (inserted) {
      auto& seen = it->second;
      seen.assign(n, 0);
      std::queue<NodeId> frontier;
      frontier.push(od.origin);
      seen[static_cast<std::size_t>(od.origin)] = 1;
      while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop();
        for (LinkId lid : net.outgoing(u)) {
          const NodeId v = net.link(lid).head;
          if (!seen[static_cast<std::size_t>(v)]) {
            seen[static_cast<std::size_t>(v)] = 1;
            frontier.push(v);
          }
        }
      }
    }
    if (!it->second[static_cast<std::size_t>(od.destination)]) {
      diagnostics.push_back("unreachable: no directed path from node " + std::to_string(od.origin + 1) +
                            " to node " + std::to_string(od.destination + 1));
    }
  }
  return diagnostics;
}

}  // namespace ctap
