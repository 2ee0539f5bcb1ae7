#include "ctsim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace ctsim::scenario {
namespace {

using nlohmann::json;

std::string at(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

std::string index(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

/// Rejects keys outside the allowed set so that typos do not go unnoticed.
void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where.empty() ? "<root>" : where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) throw ConfigError(at(where, key), "unknown field");
  }
}

const json* field(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return nullptr;
  return &*it;
}

std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw ConfigError(where, "expected a string");
  return v.get<std::string>();
}

bool get_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
  return v.get<bool>();
}

std::int64_t get_int(const json& v, const std::string& where, std::int64_t lo, std::int64_t hi) {
  if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
  std::int64_t x = 0;
  if (v.is_number_unsigned()) {
    const auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(hi)) throw ConfigError(where, "out of range");
    x = static_cast<std::int64_t>(u);
  } else {
    x = v.get<std::int64_t>();
  }
  if (x < lo || x > hi) {
    throw ConfigError(where, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return x;
}

/// Decimal numbers are accepted as strings ("0.25") or JSON numbers.
Fixed get_fixed(const json& v, const std::string& where) {
  std::string text;
  if (v.is_string()) {
    text = v.get<std::string>();
  } else if (v.is_number()) {
    text = v.dump();
  } else {
    throw ConfigError(where, "expected a decimal number");
  }
  try {
    return Fixed::parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where, e.what());
  }
}

Fixed get_unit(const json& v, const std::string& where) {
  const Fixed x = get_fixed(v, where);
  if (!x.in_unit_interval()) throw ConfigError(where, "must be in [0, 1]");
  return x;
}

std::vector<std::string> get_strings(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(get_string(v[i], index(where, i)));
  return out;
}

consensus::ConsensusParams parse_consensus(const json& c, const std::string& where) {
  only_keys(c, where,
            {"base_target", "prefix_bits", "block_interval_ms", "slot_ms", "time_cap",
             "max_block_txs", "epoch_blocks", "bootstrap_trust"});
  consensus::ConsensusParams p;
  if (auto v = field(c, "base_target")) p.base_target = get_unit(*v, at(where, "base_target"));
  if (auto v = field(c, "prefix_bits")) {
    p.prefix_bits = static_cast<std::uint32_t>(get_int(*v, at(where, "prefix_bits"), 1, 64));
  }
  if (auto v = field(c, "block_interval_ms")) {
    p.block_interval_ms = get_int(*v, at(where, "block_interval_ms"), 1, 86'400'000);
  }
  if (auto v = field(c, "slot_ms")) p.slot_ms = get_int(*v, at(where, "slot_ms"), 1, 86'400'000);
  if (auto v = field(c, "time_cap")) {
    p.time_cap = static_cast<std::uint32_t>(get_int(*v, at(where, "time_cap"), 1, 1'000'000));
  }
  if (auto v = field(c, "max_block_txs")) {
    p.max_block_txs =
        static_cast<std::uint32_t>(get_int(*v, at(where, "max_block_txs"), 1, 100'000));
  }
  if (auto v = field(c, "epoch_blocks")) {
    p.epoch_blocks =
        static_cast<std::uint64_t>(get_int(*v, at(where, "epoch_blocks"), 0, INT64_MAX));
  }
  if (auto v = field(c, "bootstrap_trust")) {
    p.bootstrap_trust = get_unit(*v, at(where, "bootstrap_trust"));
  }
  return p;
}

sim::NodeSpec parse_node(const json& n, const std::string& where) {
  only_keys(n, where,
            {"name", "stake", "omega1", "omega2", "behavior", "trust_override", "genesis",
             "privileges"});
  sim::NodeSpec spec;
  const json* name = field(n, "name");
  if (name == nullptr) throw ConfigError(at(where, "name"), "required");
  spec.name = get_string(*name, at(where, "name"));
  if (spec.name.empty()) throw ConfigError(at(where, "name"), "must not be empty");
  if (auto v = field(n, "stake")) {
    spec.stake = get_fixed(*v, at(where, "stake"));
    if (spec.stake <= Fixed::zero()) throw ConfigError(at(where, "stake"), "must be positive");
  }
  if (auto v = field(n, "omega1")) spec.omega1 = get_unit(*v, at(where, "omega1"));
  if (auto v = field(n, "omega2")) spec.omega2 = get_unit(*v, at(where, "omega2"));
  if (spec.omega1 == Fixed::zero() && spec.omega2 == Fixed::zero()) {
    throw ConfigError(at(where, "omega1"), "omega1 and omega2 cannot both be zero");
  }
  if (auto v = field(n, "behavior")) {
    const std::string b = get_string(*v, at(where, "behavior"));
    auto parsed = sim::parse_behavior(b);
    if (!parsed) throw ConfigError(at(where, "behavior"), "unknown behavior '" + b + "'");
    spec.behavior = *parsed;
  }
  if (auto v = field(n, "trust_override")) {
    spec.trust_override = get_unit(*v, at(where, "trust_override"));
  }
  if (auto v = field(n, "genesis")) spec.genesis = get_bool(*v, at(where, "genesis"));
  if (auto v = field(n, "privileges")) spec.privileges = get_strings(*v, at(where, "privileges"));
  return spec;
}

std::size_t node_index(const std::vector<sim::NodeSpec>& nodes, const std::string& name,
                       const std::string& where) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].name == name) return i;
  }
  throw ConfigError(where, "unknown node '" + name + "'");
}

sim::LinkModel parse_network(const json& n, const std::string& where,
                             const std::vector<sim::NodeSpec>& nodes) {
  only_keys(n, where, {"base_latency_ms", "jitter_ms", "links"});
  sim::LinkModel links;
  if (auto v = field(n, "base_latency_ms")) {
    links.base_latency_ms = get_int(*v, at(where, "base_latency_ms"), 0, 3'600'000);
  }
  if (auto v = field(n, "jitter_ms")) {
    links.jitter_ms = get_int(*v, at(where, "jitter_ms"), 0, 3'600'000);
  }
  if (auto v = field(n, "links")) {
    const std::string base = at(where, "links");
    if (!v->is_array()) throw ConfigError(base, "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& l = (*v)[i];
      const std::string w = index(base, i);
      only_keys(l, w, {"from", "to", "latency_ms", "symmetric"});
      const json* from = field(l, "from");
      const json* to = field(l, "to");
      const json* latency = field(l, "latency_ms");
      if (from == nullptr) throw ConfigError(at(w, "from"), "required");
      if (to == nullptr) throw ConfigError(at(w, "to"), "required");
      if (latency == nullptr) throw ConfigError(at(w, "latency_ms"), "required");
      const std::size_t a = node_index(nodes, get_string(*from, at(w, "from")), at(w, "from"));
      const std::size_t b = node_index(nodes, get_string(*to, at(w, "to")), at(w, "to"));
      const Millis ms = get_int(*latency, at(w, "latency_ms"), 0, 3'600'000);
      links.overrides[{a, b}] = ms;
      bool symmetric = true;
      if (auto s = field(l, "symmetric")) symmetric = get_bool(*s, at(w, "symmetric"));
      if (symmetric) links.overrides[{b, a}] = ms;
    }
  }
  return links;
}

federation::Action parse_action(const json& a, const std::string& where,
                                const std::vector<sim::NodeSpec>& nodes) {
  only_keys(a, where,
            {"at_ms", "kind", "node", "stake", "omega1", "omega2", "user", "home", "profile",
             "foreign", "lender", "borrower", "resource", "privileges", "id", "request", "label",
             "role", "bad_credential", "auto_feedback", "cred_label", "sat_label"});
  federation::Action act;
  const json* when = field(a, "at_ms");
  if (when == nullptr) throw ConfigError(at(where, "at_ms"), "required");
  act.at_ms = get_int(*when, at(where, "at_ms"), 0, INT64_MAX / 4);
  const json* kind = field(a, "kind");
  if (kind == nullptr) throw ConfigError(at(where, "kind"), "required");
  const std::string k = get_string(*kind, at(where, "kind"));
  bool known = false;
  for (auto candidate :
       {federation::ActionKind::RegisterCsp, federation::ActionKind::RegisterUser,
        federation::ActionKind::RequestAccess, federation::ActionKind::IaasShare,
        federation::ActionKind::Feedback}) {
    if (federation::action_name(candidate) == k) {
      act.kind = candidate;
      known = true;
    }
  }
  if (!known) throw ConfigError(at(where, "kind"), "unknown action kind '" + k + "'");

  auto str = [&](const char* key, std::string& out, bool required) {
    if (auto v = field(a, key)) {
      out = get_string(*v, at(where, key));
    } else if (required) {
      throw ConfigError(at(where, key), "required for " + k);
    }
  };
  auto check_node = [&](const char* key, const std::string& name) {
    if (!name.empty()) node_index(nodes, name, at(where, key));
  };

  if (auto v = field(a, "stake")) act.stake = get_fixed(*v, at(where, "stake"));
  if (auto v = field(a, "omega1")) act.omega1 = get_fixed(*v, at(where, "omega1"));
  if (auto v = field(a, "omega2")) act.omega2 = get_fixed(*v, at(where, "omega2"));
  if (auto v = field(a, "privileges")) act.privileges = get_strings(*v, at(where, "privileges"));
  if (auto v = field(a, "bad_credential")) {
    act.bad_credential = get_bool(*v, at(where, "bad_credential"));
  }
  if (auto v = field(a, "auto_feedback")) {
    act.auto_feedback = get_bool(*v, at(where, "auto_feedback"));
  }
  if (auto v = field(a, "cred_label")) {
    const std::string s = get_string(*v, at(where, "cred_label"));
    act.cred_label = trust::parse_cred_label(s);
    if (!act.cred_label) throw ConfigError(at(where, "cred_label"), "unknown label '" + s + "'");
  }
  if (auto v = field(a, "sat_label")) {
    const std::string s = get_string(*v, at(where, "sat_label"));
    act.sat_label = trust::parse_sat_label(s);
    if (!act.sat_label) throw ConfigError(at(where, "sat_label"), "unknown label '" + s + "'");
  }
  if (auto v = field(a, "role")) {
    const std::string s = get_string(*v, at(where, "role"));
    if (s == "home") {
      act.role = ledger::FeedbackRole::Home;
    } else if (s == "foreign") {
      act.role = ledger::FeedbackRole::Foreign;
    } else {
      throw ConfigError(at(where, "role"), "expected 'home' or 'foreign'");
    }
  }
  str("id", act.id, false);

  switch (act.kind) {
    case federation::ActionKind::RegisterCsp:
      str("node", act.node, true);
      check_node("node", act.node);
      break;
    case federation::ActionKind::RegisterUser:
      str("user", act.user, true);
      str("home", act.home, true);
      str("profile", act.profile, false);
      check_node("home", act.home);
      break;
    case federation::ActionKind::RequestAccess:
      // An unknown foreign CSP is a runtime denial, not a config error.
      str("user", act.user, true);
      str("foreign", act.foreign, true);
      str("resource", act.resource, true);
      str("home", act.home, false);
      break;
    case federation::ActionKind::IaasShare:
      str("borrower", act.borrower, true);
      if (field(a, "lender") != nullptr) {
        str("lender", act.foreign, true);
      } else {
        str("foreign", act.foreign, true);
      }
      str("resource", act.resource, true);
      break;
    case federation::ActionKind::Feedback:
      str("node", act.node, true);
      str("request", act.request, true);
      str("label", act.label, true);
      check_node("node", act.node);
      break;
  }
  return act;
}

TimedPartition parse_partition(const json& p, const std::string& where,
                               const std::vector<sim::NodeSpec>& nodes) {
  only_keys(p, where, {"at_ms", "groups", "heal"});
  TimedPartition out;
  const json* when = field(p, "at_ms");
  if (when == nullptr) throw ConfigError(at(where, "at_ms"), "required");
  out.at_ms = get_int(*when, at(where, "at_ms"), 0, INT64_MAX / 4);
  const bool heal = field(p, "heal") != nullptr && get_bool(p["heal"], at(where, "heal"));
  const json* groups = field(p, "groups");
  if (heal) {
    if (groups != nullptr) throw ConfigError(at(where, "groups"), "not allowed with heal");
    return out;
  }
  if (groups == nullptr || !groups->is_array() || groups->size() < 2) {
    throw ConfigError(at(where, "groups"), "expected at least two groups of node names");
  }
  std::vector<int> seen(nodes.size(), 0);
  for (std::size_t g = 0; g < groups->size(); ++g) {
    const std::string gw = index(at(where, "groups"), g);
    const auto names = get_strings((*groups)[g], gw);
    if (names.empty()) throw ConfigError(gw, "empty group");
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < names.size(); ++i) {
      const std::size_t id = node_index(nodes, names[i], index(gw, i));
      if (seen[id]++ != 0) throw ConfigError(index(gw, i), "node listed twice");
      ids.push_back(id);
    }
    out.change.groups.push_back(std::move(ids));
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (seen[i] == 0) throw ConfigError(at(where, "groups"), "node '" + nodes[i].name + "' missing");
  }
  return out;
}

}  // namespace

Scenario parse_scenario(const nlohmann::json& doc) {
  only_keys(doc, "",
            {"seed", "duration_ms", "normalize_stakes", "consensus", "nodes", "network",
             "protocol", "actions", "partitions", "output", "log_level", "report_every_blocks"});
  Scenario s;
  const json* seed = field(doc, "seed");
  if (seed == nullptr) throw ConfigError("seed", "required");
  if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<std::int64_t>() >= 0)) {
    throw ConfigError("seed", "expected a non-negative integer");
  }
  s.world.seed = seed->get<std::uint64_t>();

  const json* duration = field(doc, "duration_ms");
  if (duration == nullptr) throw ConfigError("duration_ms", "required");
  s.duration_ms = get_int(*duration, "duration_ms", 1, INT64_MAX / 4);

  if (auto v = field(doc, "normalize_stakes")) {
    s.normalize_stakes = get_bool(*v, "normalize_stakes");
  }
  if (auto v = field(doc, "consensus")) s.world.params = parse_consensus(*v, "consensus");

  const json* nodes = field(doc, "nodes");
  if (nodes == nullptr || !nodes->is_array() || nodes->empty()) {
    throw ConfigError("nodes", "expected a non-empty array");
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < nodes->size(); ++i) {
    auto spec = parse_node((*nodes)[i], index("nodes", i));
    if (!names.insert(spec.name).second) {
      throw ConfigError(index("nodes", i) + ".name", "duplicate name '" + spec.name + "'");
    }
    s.world.nodes.push_back(std::move(spec));
  }
  bool any_genesis = false;
  Int128 total = 0;
  for (const auto& spec : s.world.nodes) {
    any_genesis = any_genesis || spec.genesis;
    total += spec.stake.raw();
  }
  if (!any_genesis) throw ConfigError("nodes", "at least one node must have genesis: true");
  if (total != Fixed::kScale) {
    if (!s.normalize_stakes) {
      throw ConfigError("nodes", "stakes sum to " + Fixed::from_raw(static_cast<std::int64_t>(
                                                         std::min<Int128>(total, INT64_MAX)))
                                                         .str() +
                                     ", expected 1 (set normalize_stakes to rescale)");
    }
    for (auto& spec : s.world.nodes) {
      spec.stake = Fixed::from_raw(
          floor_div(static_cast<Int128>(spec.stake.raw()) * Fixed::kScale, total));
      if (spec.stake <= Fixed::zero()) throw ConfigError("nodes", "stake rounds to zero");
    }
  }

  if (auto v = field(doc, "network")) {
    s.world.links = parse_network(*v, "network", s.world.nodes);
  }
  if (auto v = field(doc, "protocol")) {
    only_keys(*v, "protocol",
              {"mempool_ttl_intervals", "token_ttl_intervals", "grant_timeout_intervals",
               "max_sync_blocks"});
    if (auto x = field(*v, "mempool_ttl_intervals")) {
      s.world.mempool_ttl_intervals = static_cast<std::uint32_t>(
          get_int(*x, "protocol.mempool_ttl_intervals", 1, 1'000'000));
    }
    if (auto x = field(*v, "token_ttl_intervals")) {
      s.world.token_ttl_intervals =
          static_cast<std::uint32_t>(get_int(*x, "protocol.token_ttl_intervals", 1, 1'000'000));
    }
    if (auto x = field(*v, "grant_timeout_intervals")) {
      s.world.grant_timeout_intervals = static_cast<std::uint32_t>(
          get_int(*x, "protocol.grant_timeout_intervals", 1, 1'000'000));
    }
    if (auto x = field(*v, "max_sync_blocks")) {
      s.world.max_sync_blocks =
          static_cast<std::size_t>(get_int(*x, "protocol.max_sync_blocks", 1, 1'000'000));
    }
  }
  if (auto v = field(doc, "log_level")) {
    const std::string level = get_string(*v, "log_level");
    auto parsed = parse_log_level(level);
    if (!parsed) throw ConfigError("log_level", "expected debug, info or warn");
    s.world.log_level = *parsed;
  }
  if (auto v = field(doc, "actions")) {
    if (!v->is_array()) throw ConfigError("actions", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      s.actions.push_back(parse_action((*v)[i], index("actions", i), s.world.nodes));
    }
  }
  if (auto v = field(doc, "partitions")) {
    if (!v->is_array()) throw ConfigError("partitions", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      s.partitions.push_back(parse_partition((*v)[i], index("partitions", i), s.world.nodes));
    }
  }
  if (auto v = field(doc, "output")) {
    only_keys(*v, "output", {"dir", "ledger", "events", "report"});
    if (auto x = field(*v, "dir")) s.output.dir = get_string(*x, "output.dir");
    if (auto x = field(*v, "ledger")) s.output.ledger = get_string(*x, "output.ledger");
    if (auto x = field(*v, "events")) s.output.events = get_string(*x, "output.events");
    if (auto x = field(*v, "report")) s.output.report = get_string(*x, "output.report");
  }
  if (auto v = field(doc, "report_every_blocks")) {
    s.report_every_blocks =
        static_cast<std::uint64_t>(get_int(*v, "report_every_blocks", 0, INT64_MAX));
  }

  try {
    s.world.params.validate(true);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("consensus", e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("<file>", "cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  json doc;
  try {
    doc = json::parse(buffer.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  Scenario s = parse_scenario(doc);
  if (s.output.dir.is_relative()) s.output.dir = path.parent_path() / s.output.dir;
  return s;
}

RunOutcome run_scenario(const Scenario& scenario) {
  RunOutcome out;
  out.world = std::make_unique<sim::World>(scenario.world, scenario.actions);
  for (const auto& p : scenario.partitions) out.world->schedule(p.at_ms, p.change);
  out.world->run_until(scenario.duration_ms);

  std::vector<consensus::TipMetrics> tips;
  for (std::size_t i = 0; i < out.world->node_count(); ++i) {
    tips.push_back(out.world->node(i).replica->tip_metrics());
  }
  out.source_node = consensus::resolve(tips);
  out.ledger.params = out.world->params();
  out.ledger.blocks = out.world->node(out.source_node).replica->chain().blocks();
  return out;
}

}  // namespace ctsim::scenario
