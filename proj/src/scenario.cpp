#include "riskplan/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "riskplan/errors.hpp"

namespace riskplan {

std::optional<std::size_t> Scenario::waypoint_index(std::string_view id) const {
  for (std::size_t i = 0; i < waypoints.size(); ++i)
    if (waypoints[i].id == id) return i;
  return std::nullopt;
}

std::optional<std::size_t> Scenario::obstacle_index(std::string_view label) const {
  for (std::size_t i = 0; i < obstacles.size(); ++i)
    if (obstacles[i].label == label) return i;
  return std::nullopt;
}

const Edge* Scenario::find_edge(std::string_view a, std::string_view b) const {
  for (const auto& e : edges)
    if ((e.from == a && e.to == b) || (e.from == b && e.to == a)) return &e;
  return nullptr;
}

namespace {

struct Pos {
  std::size_t line = 0;
  std::size_t column = 0;
};

// Source positions of the declarations checked after parsing. Absent for
// scenarios built in memory, in which case diagnostics carry line 0.
struct Positions {
  std::vector<Pos> obstacles;
  std::vector<Pos> obstacle_half;
  std::vector<Pos> waypoints;
  std::vector<Pos> waypoint_inspect;
  std::vector<Pos> edge_from;
  std::vector<Pos> edge_to;
  std::vector<Pos> edge_p;
  Pos mission_start, mission_final, limits;
  std::vector<Pos> mission_inspect;
};

struct Token {
  std::string text;
  std::size_t column = 0;
};

bool is_ident(std::string_view s) {
  if (s.empty()) return false;
  const auto first = static_cast<unsigned char>(s[0]);
  if (!(std::isalpha(first) || first == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    const auto c = static_cast<unsigned char>(ch);
    return std::isalnum(c) || c == '_' || c == '-' || c == '.';
  });
}

std::optional<double> parse_number(std::string_view s) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<Eigen::Vector3d> parse_vec3(std::string_view s) {
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) {
    const auto comma = s.find(',');
    if ((i < 2) != (comma != std::string_view::npos)) return std::nullopt;
    auto v = parse_number(s.substr(0, comma));
    if (!v) return std::nullopt;
    out[i] = *v;
    if (i < 2) s.remove_prefix(comma + 1);
  }
  return out;
}

class Parser {
 public:
  ParseResult run(std::string_view text) {
    std::size_t line_no = 0;
    while (!text.empty() || line_no == 0) {
      ++line_no;
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      parse_line(line_no, line);
      if (text.empty()) break;
    }
    if (!seen_mission_)
      error("SyntaxError", {line_no + 1, 1}, "missing MISSION declaration");
    return finish();
  }

 private:
  void error(std::string kind, Pos p, std::string message) {
    diags_.push_back({std::move(kind), p.line, p.column, std::move(message)});
  }

  bool tokenize(std::size_t line_no, std::string_view line, std::vector<Token>& out) {
    std::size_t i = 0;
    while (i < line.size()) {
      if (line[i] == ' ' || line[i] == '\t') {
        ++i;
        continue;
      }
      if (line[i] == '#') break;
      Token tok{{}, i + 1};
      bool quoted = false;
      while (i < line.size() && (quoted || (line[i] != ' ' && line[i] != '\t'))) {
        if (line[i] == '"') {
          quoted = !quoted;
        } else {
          tok.text.push_back(line[i]);
        }
        ++i;
      }
      if (quoted) {
        error("SyntaxError", {line_no, tok.column}, "unterminated string");
        return false;
      }
      out.push_back(std::move(tok));
    }
    return true;
  }

  // Splits key=value options; bare words are flags with an empty value.
  bool options(std::size_t line_no, const std::vector<Token>& toks, std::size_t from,
               const std::set<std::string, std::less<>>& keys,
               const std::set<std::string, std::less<>>& flags,
               std::map<std::string, Token, std::less<>>& out) {
    bool ok = true;
    for (std::size_t i = from; i < toks.size(); ++i) {
      const auto& t = toks[i];
      const auto eq = t.text.find('=');
      const std::string key = t.text.substr(0, eq);
      const bool known = eq == std::string::npos ? flags.count(key) != 0 : keys.count(key) != 0;
      if (!known) {
        error("SyntaxError", {line_no, t.column}, fmt::format("unexpected token '{}'", t.text));
        ok = false;
        continue;
      }
      if (out.count(key)) {
        error("SyntaxError", {line_no, t.column}, fmt::format("option '{}' given twice", key));
        ok = false;
        continue;
      }
      out[key] = Token{eq == std::string::npos ? std::string{} : t.text.substr(eq + 1),
                       t.column + (eq == std::string::npos ? 0 : eq + 1)};
    }
    return ok;
  }

  bool require(std::size_t line_no, const std::vector<Token>& toks,
               const std::map<std::string, Token, std::less<>>& opts, std::string_view key) {
    if (opts.count(key)) return true;
    error("SyntaxError", {line_no, toks.front().column},
          fmt::format("{} requires '{}='", toks.front().text, key));
    return false;
  }

  std::optional<std::string> ident(std::size_t line_no, const Token& t) {
    if (is_ident(t.text)) return t.text;
    error("SyntaxError", {line_no, t.column}, fmt::format("'{}' is not a valid identifier", t.text));
    return std::nullopt;
  }

  std::optional<double> number(std::size_t line_no, const Token& t) {
    auto v = parse_number(t.text);
    if (!v) error("SyntaxError", {line_no, t.column}, fmt::format("'{}' is not a number", t.text));
    return v;
  }

  std::optional<Eigen::Vector3d> vec3(std::size_t line_no, const Token& t) {
    auto v = parse_vec3(t.text);
    if (!v)
      error("SyntaxError", {line_no, t.column},
            fmt::format("'{}' is not a vector of the form x,y,z", t.text));
    return v;
  }

  void parse_line(std::size_t line_no, std::string_view line) {
    std::vector<Token> toks;
    if (!tokenize(line_no, line, toks) || toks.empty()) return;
    const auto& kw = toks.front().text;
    if (kw == "OBSTACLE") {
      parse_obstacle(line_no, toks);
    } else if (kw == "WAYPOINT") {
      parse_waypoint(line_no, toks);
    } else if (kw == "EDGE") {
      parse_edge(line_no, toks);
    } else if (kw == "MISSION") {
      parse_mission(line_no, toks);
    } else if (kw == "LIMITS") {
      parse_limits(line_no, toks);
    } else {
      error("SyntaxError", {line_no, toks.front().column},
            fmt::format("unknown declaration '{}'", kw));
    }
  }

  void parse_obstacle(std::size_t line_no, const std::vector<Token>& toks) {
    if (toks.size() < 2) {
      error("SyntaxError", {line_no, toks[0].column}, "OBSTACLE requires a label");
      return;
    }
    auto label = ident(line_no, toks[1]);
    std::map<std::string, Token, std::less<>> o;
    bool ok = options(line_no, toks, 2, {"center", "half"}, {"perturb"}, o) && label;
    ok = require(line_no, toks, o, "center") && ok;
    ok = require(line_no, toks, o, "half") && ok;
    if (!ok) return;
    auto center = vec3(line_no, o["center"]);
    auto half = vec3(line_no, o["half"]);
    if (!center || !half) return;
    if (scenario_.obstacle_index(*label)) {
      error("DuplicateId", {line_no, toks[1].column}, fmt::format("obstacle '{}' declared twice", *label));
      return;
    }
    scenario_.obstacles.push_back({*label, *center, *half, o.count("perturb") != 0});
    pos_.obstacles.push_back({line_no, toks[1].column});
    pos_.obstacle_half.push_back({line_no, o["half"].column});
  }

  void parse_waypoint(std::size_t line_no, const std::vector<Token>& toks) {
    if (toks.size() < 2) {
      error("SyntaxError", {line_no, toks[0].column}, "WAYPOINT requires an id");
      return;
    }
    auto id = ident(line_no, toks[1]);
    std::map<std::string, Token, std::less<>> o;
    bool ok = options(line_no, toks, 2, {"pos", "label", "inspect"}, {"critical"}, o) && id;
    ok = require(line_no, toks, o, "pos") && ok;
    if (!ok) return;
    auto pos = vec3(line_no, o["pos"]);
    if (!pos) return;
    std::optional<std::string> target;
    if (o.count("inspect")) {
      target = ident(line_no, o["inspect"]);
      if (!target) return;
    }
    if (scenario_.waypoint_index(*id)) {
      error("DuplicateId", {line_no, toks[1].column}, fmt::format("waypoint '{}' declared twice", *id));
      return;
    }
    Waypoint w{*id, o.count("label") ? o["label"].text : *id, *pos, o.count("critical") != 0, target};
    scenario_.waypoints.push_back(std::move(w));
    pos_.waypoints.push_back({line_no, toks[1].column});
    pos_.waypoint_inspect.push_back(o.count("inspect") ? Pos{line_no, o["inspect"].column} : Pos{});
  }

  void parse_edge(std::size_t line_no, const std::vector<Token>& toks) {
    if (toks.size() < 3) {
      error("SyntaxError", {line_no, toks[0].column}, "EDGE requires two waypoint ids");
      return;
    }
    auto a = ident(line_no, toks[1]);
    auto b = ident(line_no, toks[2]);
    std::map<std::string, Token, std::less<>> o;
    if (!options(line_no, toks, 3, {"p"}, {}, o) || !a || !b) return;
    double p = 0.0;
    if (o.count("p")) {
      auto v = number(line_no, o["p"]);
      if (!v) return;
      p = *v;
    }
    scenario_.edges.push_back({*a, *b, p});
    pos_.edge_from.push_back({line_no, toks[1].column});
    pos_.edge_to.push_back({line_no, toks[2].column});
    pos_.edge_p.push_back(o.count("p") ? Pos{line_no, o["p"].column} : Pos{line_no, toks[0].column});
  }

  void parse_mission(std::size_t line_no, const std::vector<Token>& toks) {
    if (seen_mission_) {
      error("SyntaxError", {line_no, toks[0].column}, "MISSION declared twice");
      return;
    }
    seen_mission_ = true;
    std::map<std::string, Token, std::less<>> o;
    bool ok = options(line_no, toks, 1, {"start", "final", "inspect"}, {}, o);
    ok = require(line_no, toks, o, "start") && ok;
    ok = require(line_no, toks, o, "final") && ok;
    if (!ok) return;
    auto start = ident(line_no, o["start"]);
    auto final = ident(line_no, o["final"]);
    if (!start || !final) return;
    scenario_.mission.start = *start;
    scenario_.mission.final = *final;
    pos_.mission_start = {line_no, o["start"].column};
    pos_.mission_final = {line_no, o["final"].column};
    if (o.count("inspect")) {
      const auto& t = o["inspect"];
      std::size_t offset = 0;
      while (offset <= t.text.size()) {
        auto comma = t.text.find(',', offset);
        if (comma == std::string::npos) comma = t.text.size();
        Token part{t.text.substr(offset, comma - offset), t.column + offset};
        auto label = ident(line_no, part);
        if (!label) return;
        scenario_.mission.inspect.push_back(*label);
        pos_.mission_inspect.push_back({line_no, part.column});
        offset = comma + 1;
      }
    }
  }

  void parse_limits(std::size_t line_no, const std::vector<Token>& toks) {
    std::map<std::string, Token, std::less<>> o;
    if (!options(line_no, toks, 1, {"v_max", "v_crit", "critical_radius"}, {}, o)) return;
    for (auto& [key, tok] : o) {
      auto v = number(line_no, tok);
      if (!v) return;
      if (key == "v_max") scenario_.limits.v_max = *v;
      if (key == "v_crit") scenario_.limits.v_crit = *v;
      if (key == "critical_radius") scenario_.limits.critical_radius = *v;
    }
    pos_.limits = {line_no, toks[0].column};
  }

  ParseResult finish();

  Scenario scenario_;
  Positions pos_;
  std::vector<Diagnostic> diags_;
  bool seen_mission_ = false;
};

template <typename V>
Pos at(const V& v, std::size_t i) {
  return i < v.size() ? v[i] : Pos{};
}

std::vector<Diagnostic> check_impl(const Scenario& s, const Positions& pos) {
  std::vector<Diagnostic> out;
  auto report = [&](std::string kind, Pos p, std::string msg) {
    out.push_back({std::move(kind), p.line, p.column, std::move(msg)});
  };

  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
      const auto& o = s.obstacles[i];
      if (!seen.insert(o.label).second)
        report("DuplicateId", at(pos.obstacles, i), fmt::format("obstacle '{}' declared twice", o.label));
      if ((o.half_extents.array() < 0.0).any())
        report("InvalidValue", at(pos.obstacle_half, i),
               fmt::format("obstacle '{}' has negative half-extents", o.label));
    }
  }
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < s.waypoints.size(); ++i) {
      const auto& w = s.waypoints[i];
      if (!seen.insert(w.id).second)
        report("DuplicateId", at(pos.waypoints, i), fmt::format("waypoint '{}' declared twice", w.id));
      if (w.inspection_target && !s.obstacle_index(*w.inspection_target))
        report("UnknownReference", at(pos.waypoint_inspect, i),
               fmt::format("waypoint '{}' inspects unknown obstacle '{}'", w.id, *w.inspection_target));
    }
  }
  std::set<std::pair<std::string, std::string>> edge_keys;
  for (std::size_t i = 0; i < s.edges.size(); ++i) {
    const auto& e = s.edges[i];
    bool refs = true;
    if (!s.waypoint_index(e.from)) {
      report("UnknownReference", at(pos.edge_from, i), fmt::format("edge references unknown waypoint '{}'", e.from));
      refs = false;
    }
    if (!s.waypoint_index(e.to)) {
      report("UnknownReference", at(pos.edge_to, i), fmt::format("edge references unknown waypoint '{}'", e.to));
      refs = false;
    }
    if (refs && e.from == e.to)
      report("InvalidValue", at(pos.edge_to, i), fmt::format("edge '{}'-'{}' is a self loop", e.from, e.to));
    if (!(e.collision_probability >= 0.0 && e.collision_probability < 1.0))
      report("InvalidValue", at(pos.edge_p, i),
             fmt::format("collision probability {} outside [0,1)", e.collision_probability));
    auto key = std::minmax(e.from, e.to);
    if (refs && !edge_keys.insert({key.first, key.second}).second)
      report("DuplicateId", at(pos.edge_from, i), fmt::format("edge '{}'-'{}' declared twice", e.from, e.to));
  }

  if (!s.waypoint_index(s.mission.start))
    report("UnknownReference", pos.mission_start,
           fmt::format("mission start '{}' is not a declared waypoint", s.mission.start));
  if (!s.waypoint_index(s.mission.final))
    report("UnknownReference", pos.mission_final,
           fmt::format("mission final '{}' is not a declared waypoint", s.mission.final));
  {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < s.mission.inspect.size(); ++i) {
      const auto& t = s.mission.inspect[i];
      if (!s.obstacle_index(t))
        report("UnknownReference", at(pos.mission_inspect, i),
               fmt::format("mission inspects unknown obstacle '{}'", t));
      if (!seen.insert(t).second)
        report("DuplicateId", at(pos.mission_inspect, i), fmt::format("inspection target '{}' listed twice", t));
    }
  }

  const auto& l = s.limits;
  if (!(l.v_max > 0.0 && l.v_crit > 0.0 && l.v_crit <= l.v_max))
    report("InvalidValue", pos.limits,
           fmt::format("speed limits need 0 < v_crit <= v_max (got v_crit={}, v_max={})", l.v_crit, l.v_max));
  if (!(l.critical_radius >= 0.0))
    report("InvalidValue", pos.limits, fmt::format("critical radius {} is negative", l.critical_radius));
  return out;
}

ParseResult Parser::finish() {
  ParseResult result;
  result.diagnostics = std::move(diags_);
  // Declaration-level duplicates were already reported while parsing.
  for (auto& d : check_impl(scenario_, pos_)) {
    const bool dup = std::any_of(result.diagnostics.begin(), result.diagnostics.end(), [&](const Diagnostic& e) {
      return e.kind == d.kind && e.message == d.message;
    });
    if (!dup) result.diagnostics.push_back(std::move(d));
  }
  std::stable_sort(result.diagnostics.begin(), result.diagnostics.end(),
                   [](const Diagnostic& a, const Diagnostic& b) {
                     return std::tie(a.line, a.column) < std::tie(b.line, b.column);
                   });
  if (result.diagnostics.empty()) result.scenario = std::move(scenario_);
  return result;
}

std::string vec(const Eigen::Vector3d& v) { return fmt::format("{},{},{}", v.x(), v.y(), v.z()); }

}  // namespace

ParseResult parse_scenario(std::string_view text) { return Parser{}.run(text); }

std::vector<Diagnostic> check_scenario(const Scenario& s) { return check_impl(s, Positions{}); }

std::string write_scenario(const Scenario& s) {
  std::string out;
  const auto& l = s.limits;
  out += fmt::format("LIMITS v_max={} v_crit={} critical_radius={}\n\n", l.v_max, l.v_crit, l.critical_radius);
  for (const auto& o : s.obstacles)
    out += fmt::format("OBSTACLE {} center={} half={}{}\n", o.label, vec(o.center), vec(o.half_extents),
                       o.perturbable ? " perturb" : "");
  if (!s.obstacles.empty()) out += '\n';
  for (const auto& w : s.waypoints) {
    out += fmt::format("WAYPOINT {} pos={}", w.id, vec(w.position));
    if (w.label != w.id) out += fmt::format(" label=\"{}\"", w.label);
    if (w.critical) out += " critical";
    if (w.inspection_target) out += fmt::format(" inspect={}", *w.inspection_target);
    out += '\n';
  }
  if (!s.waypoints.empty()) out += '\n';
  for (const auto& e : s.edges) {
    out += fmt::format("EDGE {} {}", e.from, e.to);
    if (e.collision_probability != 0.0) out += fmt::format(" p={}", e.collision_probability);
    out += '\n';
  }
  if (!s.edges.empty()) out += '\n';
  out += fmt::format("MISSION start={} final={}", s.mission.start, s.mission.final);
  if (!s.mission.inspect.empty()) {
    out += " inspect=";
    for (std::size_t i = 0; i < s.mission.inspect.size(); ++i)
      out += (i ? "," : "") + s.mission.inspect[i];
  }
  out += '\n';
  return out;
}

GroundedProblem ground_to_mdp(const Scenario& s, const GroundingOptions& opts) {
  if (auto diags = check_scenario(s); !diags.empty())
    throw InvalidArgument("scenario is invalid: " + diags.front().message);
  if (s.mission.inspect.size() > kMaxInspectionTargets)
    throw InvalidArgument(fmt::format("at most {} inspection targets are supported", kMaxInspectionTargets));
  if (opts.collision == CollisionModel::Restart && !(opts.restart_cost >= 0.0))
    throw InvalidArgument("restart cost must be non-negative");

  GroundedProblem g;
  g.targets = s.mission.inspect;
  g.num_waypoints = s.waypoints.size();
  for (const auto& t : g.targets) {
    const bool has = std::any_of(s.waypoints.begin(), s.waypoints.end(),
                                 [&](const Waypoint& w) { return w.inspection_target == t; });
    if (!has) throw UngroundableGoal(t);
  }

  const std::size_t k = g.targets.size();
  const std::uint64_t full = (std::uint64_t{1} << k) - 1;
  const std::size_t W = s.waypoints.size();
  auto& m = g.mdp;

  for (std::size_t w = 0; w < W; ++w) {
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
      std::string bits;
      for (std::size_t b = 0; b < k; ++b) bits += (mask >> b) & 1 ? '1' : '0';
      const StateId id = g.encode(w, mask);
      m.states.push_back({id, k ? fmt::format("{}[{}]", s.waypoints[w].id, bits) : s.waypoints[w].id, false, 1.0});
    }
  }
  g.collided = m.states.size();
  m.states.push_back({g.collided, "collided", false,
                      opts.collision == CollisionModel::Restart ? opts.restart_cost : 1.0});

  const std::size_t start_w = *s.waypoint_index(s.mission.start);
  const std::size_t final_w = *s.waypoint_index(s.mission.final);
  m.start = g.encode(start_w, 0);
  const StateId goal = g.encode(final_w, full);
  m.goals.insert(goal);
  m.states[goal].is_goal = true;

  for (std::size_t w = 0; w < W; ++w) {
    m.actions.push_back({m.actions.size(), "goto " + s.waypoints[w].id});
    g.actions.push_back({GroundedAction::Kind::Move, w, 0});
  }
  for (std::size_t t = 0; t < k; ++t) {
    m.actions.push_back({m.actions.size(), "inspect " + g.targets[t]});
    g.actions.push_back({GroundedAction::Kind::Inspect, 0, t});
  }
  ActionId recover = 0;
  if (opts.collision == CollisionModel::Restart) {
    recover = m.actions.size();
    m.actions.push_back({recover, "recover"});
    g.actions.push_back({GroundedAction::Kind::Recover, start_w, 0});
  }

  // Adjacency in declaration order, both directions.
  std::vector<std::vector<std::pair<std::size_t, double>>> adj(W);
  for (const auto& e : s.edges) {
    const auto a = *s.waypoint_index(e.from);
    const auto b = *s.waypoint_index(e.to);
    adj[a].push_back({b, e.collision_probability});
    adj[b].push_back({a, e.collision_probability});
  }
  for (auto& row : adj) std::sort(row.begin(), row.end());

  for (std::size_t w = 0; w < W; ++w) {
    for (std::uint64_t mask = 0; mask <= full; ++mask) {
      const StateId s_id = g.encode(w, mask);
      if (m.is_goal(s_id)) continue;
      for (const auto& [v, p] : adj[w]) {
        m.transitions.push_back({s_id, v, g.encode(v, mask), 1.0 - p});
        if (p > 0.0) m.transitions.push_back({s_id, v, g.collided, p});
      }
      const auto& target = s.waypoints[w].inspection_target;
      if (!target) continue;
      for (std::size_t t = 0; t < k; ++t) {
        if (g.targets[t] == *target && !((mask >> t) & 1))
          m.transitions.push_back({s_id, W + t, g.encode(w, mask | (std::uint64_t{1} << t)), 1.0});
      }
    }
  }
  if (opts.collision == CollisionModel::Restart)
    m.transitions.push_back({g.collided, recover, m.start, 1.0});
  return g;
}

std::vector<PlanStep> steps_from_actions(const std::vector<std::string>& actions) {
  std::vector<PlanStep> out;
  for (const auto& a : actions) {
    if (a.rfind("goto ", 0) == 0) {
      out.push_back({PlanStep::Kind::Move, a.substr(5), {}});
    } else if (a.rfind("inspect ", 0) == 0) {
      out.push_back({PlanStep::Kind::Inspect, {}, a.substr(8)});
    } else {
      throw InvalidArgument(fmt::format("action '{}' is neither a move nor an inspection", a));
    }
  }
  return out;
}

}  // namespace riskplan
