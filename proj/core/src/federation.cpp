#include "ctsim/federation.hpp"

#include <algorithm>

#include "ctsim/sim.hpp"

namespace ctsim::federation {
namespace {

bool terminal(RequestState s) { return s == RequestState::Granted || s == RequestState::Denied; }

Bytes to_bytes(std::string_view text) { return Bytes(text.begin(), text.end()); }

Digest credential_for(const crypto::PublicKey& home, const Address& pseudonym,
                      std::span<const std::uint8_t> salt) {
  Bytes material(home.span().begin(), home.span().end());
  material.insert(material.end(), pseudonym.span().begin(), pseudonym.span().end());
  material.insert(material.end(), salt.begin(), salt.end());
  return crypto::hash(material);
}

Digest iaas_credential(const crypto::PublicKey& borrower) {
  return crypto::hash_concat(borrower.span(), to_bytes("iaas"));
}

}  // namespace

std::string_view state_name(RequestState s) {
  switch (s) {
    case RequestState::Requested:
      return "requested";
    case RequestState::Redirected:
      return "redirected";
    case RequestState::TokenIssued:
      return "token_issued";
    case RequestState::TokenOnChain:
      return "token_on_chain";
    case RequestState::Granted:
      return "granted";
    case RequestState::Denied:
      return "denied";
  }
  return "requested";
}

std::string_view deny_name(DenyReason r) {
  switch (r) {
    case DenyReason::None:
      return "none";
    case DenyReason::UnknownUser:
      return "UNKNOWN_USER";
    case DenyReason::UnknownCsp:
      return "UNKNOWN_CSP";
    case DenyReason::AuthFailed:
      return "AUTH_FAILED";
    case DenyReason::TokenTimeout:
      return "TOKEN_TIMEOUT";
    case DenyReason::Expired:
      return "EXPIRED";
    case DenyReason::Audience:
      return "AUDIENCE";
    case DenyReason::Resource:
      return "RESOURCE";
    case DenyReason::UserMismatch:
      return "USER_MISMATCH";
    case DenyReason::Privilege:
      return "PRIVILEGE";
    case DenyReason::Decrypt:
      return "DECRYPT";
    case DenyReason::Replay:
      return "REPLAY";
  }
  return "none";
}

std::string_view action_name(ActionKind k) {
  switch (k) {
    case ActionKind::RegisterCsp:
      return "register_csp";
    case ActionKind::RegisterUser:
      return "register_user";
    case ActionKind::RequestAccess:
      return "request_access";
    case ActionKind::IaasShare:
      return "iaas_share";
    case ActionKind::Feedback:
      return "feedback";
  }
  return "unknown";
}

std::string_view message_name(const Message& m) {
  switch (m.index()) {
    case 0:
      return "auth_redirect";
    case 1:
      return "token_notice";
    case 2:
      return "grant_deadline";
    default:
      return "grant_notice";
  }
}

const UserAccount* Federation::find_user(const std::string& name) const {
  auto it = users_.find(name);
  return it == users_.end() ? nullptr : &it->second;
}

OutcomeCounts Federation::outcomes() const {
  OutcomeCounts out;
  for (const auto& req : requests_) {
    if (req.state == RequestState::Granted) {
      ++out.granted;
    } else if (req.state == RequestState::Denied) {
      ++out.denied[std::string(deny_name(req.reason))];
    } else {
      ++out.pending;
    }
  }
  return out;
}

AccessRequest& Federation::new_request() {
  AccessRequest& req = requests_.emplace_back();
  req.id = requests_.size() - 1;
  return req;
}

void Federation::set_state(sim::World& world, AccessRequest& req, RequestState state,
                           DenyReason reason, nlohmann::json extra) {
  req.state = state;
  req.reason = reason;
  if (state == RequestState::Granted) req.granted_at = world.now();
  nlohmann::json details = std::move(extra);
  details["id"] = req.id;
  details["state"] = state_name(state);
  details["user"] = req.user;
  details["resource"] = req.resource_name;
  if (req.home < world.node_count()) details["home"] = world.node(req.home).name();
  if (req.foreign < world.node_count()) details["foreign"] = world.node(req.foreign).name();
  if (!req.label.empty()) details["label"] = req.label;
  if (req.local) details["local"] = true;
  if (req.iaas) details["iaas"] = true;
  if (req.clone_of) details["clone_of"] = *req.clone_of;
  if (req.token_id) details["token_id"] = req.token_id->hex();
  if (state == RequestState::Denied) details["reason"] = deny_name(reason);
  // The acting node: the home CSP while it authenticates, the foreign CSP otherwise.
  std::optional<std::string_view> node;
  const bool at_home = state == RequestState::TokenIssued;
  const std::size_t acting = at_home ? req.home : req.foreign;
  if (acting < world.node_count()) node = world.node(acting).name();
  world.log().emit(LogLevel::Info, world.now(), node, "request", details);
}

const UserAccount& Federation::register_user(sim::World& world, const std::string& name,
                                             std::size_t home, const std::string& profile) {
  sim::Node& h = world.node(home);
  auto [it, fresh] = users_.try_emplace(name);
  UserAccount& user = it->second;
  if (fresh) {
    user.name = name;
    const crypto::KeyPair child = crypto::derive_child_key(h.keys, h.next_user_index++);
    user.pseudonym = crypto::address_of(child.public_key);
    user.profile = to_bytes(profile);
  }
  if (std::find(user.homes.begin(), user.homes.end(), home) == user.homes.end()) {
    user.homes.push_back(home);
    std::array<std::uint8_t, 16> salt{};
    world.rng().fill(salt);
    user.credentials[home] = credential_for(h.keys.public_key, user.pseudonym, salt);
  }
  world.log().emit(LogLevel::Info, world.now(), h.name(), "user_registered",
                   {{"user", name},
                    {"pseudonym", user.pseudonym.hex()},
                    {"homes", user.homes.size()}});
  return user;
}

std::uint64_t Federation::request_access(sim::World& world, const std::string& user_name,
                                         std::size_t foreign, const std::string& resource,
                                         const Action& options) {
  AccessRequest& req = new_request();
  req.label = options.id;
  req.user = user_name;
  req.foreign = foreign;
  req.resource = crypto::address_of_label(resource);
  req.resource_name = resource;
  req.required_privileges = options.privileges;
  req.issued_at = world.now();
  req.bad_credential = options.bad_credential;
  req.auto_feedback = options.auto_feedback;
  if (options.cred_label) req.cred_label = *options.cred_label;
  if (options.sat_label) req.sat_label = *options.sat_label;
  req.home = SIZE_MAX;
  if (!req.label.empty()) request_labels_[req.label] = req.id;

  const UserAccount* user = find_user(user_name);
  if (user == nullptr || user->homes.empty()) {
    set_state(world, req, RequestState::Denied, DenyReason::UnknownUser);
    return req.id;
  }
  req.pseudonym = user->pseudonym;
  if (std::find(user->homes.begin(), user->homes.end(), foreign) != user->homes.end()) {
    req.home = foreign;
    req.local = true;
    set_state(world, req, RequestState::Requested);
    set_state(world, req, RequestState::Granted);
    return req.id;
  }
  req.home = user->homes.front();
  if (!options.home.empty()) {
    auto named = world.find_node(options.home);
    if (named && std::find(user->homes.begin(), user->homes.end(), *named) != user->homes.end()) {
      req.home = *named;
    }
  }
  set_state(world, req, RequestState::Requested);
  Digest presented = user->credentials.at(req.home);
  if (req.bad_credential) presented = crypto::hash(presented.span());
  set_state(world, req, RequestState::Redirected);
  world.send_message(foreign, req.home, AuthRedirect{req.id, presented});
  return req.id;
}

std::uint64_t Federation::iaas_share(sim::World& world, std::size_t borrower, std::size_t lender,
                                     const std::string& resource, const Action& options) {
  AccessRequest& req = new_request();
  req.label = options.id;
  req.iaas = true;
  req.user = world.node(borrower).name();
  req.pseudonym = world.node(borrower).address;
  req.home = borrower;
  req.foreign = lender;
  req.resource = crypto::address_of_label(resource);
  req.resource_name = resource;
  req.required_privileges = options.privileges;
  req.issued_at = world.now();
  req.bad_credential = options.bad_credential;
  req.auto_feedback = options.auto_feedback;
  if (options.cred_label) req.cred_label = *options.cred_label;
  if (options.sat_label) req.sat_label = *options.sat_label;
  if (!req.label.empty()) request_labels_[req.label] = req.id;
  set_state(world, req, RequestState::Requested);
  Digest presented = iaas_credential(world.node(borrower).keys.public_key);
  if (req.bad_credential) presented = crypto::hash(presented.span());
  set_state(world, req, RequestState::Redirected);
  world.send_message(lender, borrower, AuthRedirect{req.id, presented});
  return req.id;
}

Digest Federation::expected_credential(const sim::World& world, const AccessRequest& req) const {
  if (req.iaas) return iaas_credential(world.node(req.home).keys.public_key);
  const UserAccount* user = find_user(req.user);
  if (user == nullptr) return Digest{};
  auto it = user->credentials.find(req.home);
  return it == user->credentials.end() ? Digest{} : it->second;
}

void Federation::issue_token(sim::World& world, std::size_t home, AccessRequest& req) {
  sim::Node& h = world.node(home);
  const sim::Node& f = world.node(req.foreign);
  const Millis interval = world.params().block_interval_ms;

  ledger::AccessToken token;
  token.user_pseudonym = req.pseudonym;
  token.issuer = h.address;
  token.audience = f.address;
  token.resource = req.resource;
  token.privileges = h.spec.privileges;
  token.issued_at = world.now();
  token.expires_at = world.now() + static_cast<Millis>(world.config().token_ttl_intervals) * interval;
  token.nonce = h.next_nonce++;
  token = ledger::seal_token(token);

  Bytes profile;
  if (req.iaas) {
    profile = to_bytes(h.name());
  } else if (const UserAccount* user = find_user(req.user)) {
    profile = user->profile;
  }

  const auto tx = ledger::build_token_tx(h.keys, profile, req.resource, f.keys.public_key, token,
                                         world.next_links(home), world.rng());
  world.submit_tx(home, tx);
  req.token_id = token.token_id;
  set_state(world, req, RequestState::TokenIssued, DenyReason::None,
            {{"txid", tx.txid.hex()}, {"nonce", token.nonce}, {"expires_at", token.expires_at}});
  world.send_message(home, req.foreign, TokenNotice{req.id, token});

  if (h.behavior() != sim::Behavior::DoubleIssuer) return;

  // Same token, fresh encryption: a second transaction carrying one token_id.
  const auto again = ledger::build_token_tx(h.keys, profile, req.resource, f.keys.public_key, token,
                                            world.next_links(home), world.rng());
  world.submit_tx(home, again, true);

  // Same nonce, different claims.
  ledger::AccessToken twin = token;
  twin.expires_at += 1;
  twin = ledger::seal_token(twin);
  const auto twin_tx = ledger::build_token_tx(h.keys, profile, req.resource, f.keys.public_key,
                                              twin, world.next_links(home), world.rng());
  world.submit_tx(home, twin_tx, true);

  // And the original token presented a second time under a new request.
  const std::uint64_t original = req.id;
  AccessRequest copy = req;
  AccessRequest& clone = new_request();
  const std::uint64_t clone_id = clone.id;
  clone = copy;
  clone.id = clone_id;
  clone.label.clear();
  clone.clone_of = original;
  clone.granted_at = -1;
  set_state(world, clone, RequestState::TokenIssued, DenyReason::None,
            {{"txid", again.txid.hex()}});
  world.send_message(home, clone.foreign, TokenNotice{clone.id, token});
}

void Federation::try_grant(sim::World& world, std::size_t foreign, AccessRequest& req) {
  if (terminal(req.state) || !req.token_id) return;
  sim::Node& f = world.node(foreign);
  const ledger::Chain& chain = f.replica->chain();
  const auto token = chain.lookup_token(*req.token_id);
  if (!token) return;
  const ledger::Transaction* tx = chain.token_transaction(*req.token_id);
  const auto record = chain.token_record(*req.token_id);
  nlohmann::json where = {{"block_height", record ? record->height : 0}};
  if (tx != nullptr) where["txid"] = tx->txid.hex();
  if (req.state != RequestState::TokenOnChain) {
    set_state(world, req, RequestState::TokenOnChain, DenyReason::None, where);
  }
  awaiting_[foreign].erase(req.id);

  DenyReason verdict = DenyReason::None;
  if (consumed_[foreign].count(*req.token_id) != 0) {
    verdict = DenyReason::Replay;
  } else if (token->audience != f.address) {
    verdict = DenyReason::Audience;
  } else if (token->resource != req.resource ||
             (tx != nullptr && tx->inputs.at(0).resource != req.resource)) {
    verdict = DenyReason::Resource;
  } else if (token->user_pseudonym != req.pseudonym) {
    verdict = DenyReason::UserMismatch;
  } else if (world.now() >= token->expires_at) {
    verdict = DenyReason::Expired;
  } else if (!std::all_of(req.required_privileges.begin(), req.required_privileges.end(),
                          [&](const std::string& p) {
                            return std::find(token->privileges.begin(), token->privileges.end(),
                                             p) != token->privileges.end();
                          })) {
    verdict = DenyReason::Privilege;
  } else {
    try {
      (void)crypto::decrypt(f.keys.private_key, tx->inputs.at(0).enc_user);
    } catch (const std::exception&) {
      verdict = DenyReason::Decrypt;
    }
  }
  if (verdict != DenyReason::None) {
    deny(world, req, verdict);
    return;
  }

  consumed_[foreign].insert(*req.token_id);
  where["audience"] = token->audience.hex();
  where["token_resource"] = token->resource.hex();
  where["expires_at"] = token->expires_at;
  set_state(world, req, RequestState::Granted, DenyReason::None, where);

  const sim::Behavior b = f.behavior();
  if (req.auto_feedback || b == sim::Behavior::Smearer || b == sim::Behavior::Flatterer) {
    trust::CredLabel label = req.cred_label;
    if (b == sim::Behavior::Smearer) label = trust::CredLabel::VeryBad;
    if (b == sim::Behavior::Flatterer) label = trust::CredLabel::Excellent;
    submit_feedback(world, foreign, req, ledger::FeedbackRole::Foreign,
                    static_cast<std::uint8_t>(label));
  }
  world.send_message(foreign, req.home, GrantNotice{req.id});
}

void Federation::submit_feedback(sim::World& world, std::size_t rater, const AccessRequest& req,
                                 ledger::FeedbackRole role, std::uint8_t label) {
  if (!req.token_id) return;
  sim::Node& r = world.node(rater);
  ledger::FeedbackPayload payload;
  payload.rater = r.address;
  payload.subject = role == ledger::FeedbackRole::Foreign ? world.node(req.home).address
                                                          : world.node(req.foreign).address;
  payload.user = req.pseudonym;
  payload.label = label;
  payload.role = role;
  payload.token_id = *req.token_id;
  const auto tx = ledger::build_feedback_tx(r.keys, payload, world.next_links(rater).prev_tx);
  world.log().emit(LogLevel::Info, world.now(), r.name(), "feedback_submitted",
                   {{"request", req.id},
                    {"role", role == ledger::FeedbackRole::Foreign ? "foreign" : "home"},
                    {"label", label},
                    {"txid", tx.txid.hex()}});
  world.submit_tx(rater, tx);
}

void Federation::handle_message(sim::World& world, std::size_t node, const Message& message) {
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if (m.request >= requests_.size()) return;
        AccessRequest& req = requests_[m.request];
        if constexpr (std::is_same_v<T, AuthRedirect>) {
          if (terminal(req.state)) return;
          if (m.credential != expected_credential(world, req)) {
            set_state(world, req, RequestState::Denied, DenyReason::AuthFailed);
            return;
          }
          issue_token(world, node, req);
        } else if constexpr (std::is_same_v<T, TokenNotice>) {
          if (terminal(req.state)) return;
          req.token_id = m.token.token_id;
          awaiting_[node].insert(req.id);
          const Millis deadline =
              world.now() + static_cast<Millis>(world.config().grant_timeout_intervals) *
                                world.params().block_interval_ms;
          world.send_message_at(deadline, node, GrantDeadline{req.id});
          try_grant(world, node, req);
        } else if constexpr (std::is_same_v<T, GrantDeadline>) {
          awaiting_[node].erase(req.id);
          if (!terminal(req.state)) deny(world, req, DenyReason::TokenTimeout);
        } else if constexpr (std::is_same_v<T, GrantNotice>) {
          const sim::Behavior b = world.node(node).behavior();
          if (!req.auto_feedback && b != sim::Behavior::Smearer && b != sim::Behavior::Flatterer) {
            return;
          }
          trust::SatLabel label = req.sat_label;
          if (b == sim::Behavior::Smearer) label = trust::SatLabel::FullyDissatisfied;
          if (b == sim::Behavior::Flatterer) label = trust::SatLabel::FullySatisfied;
          submit_feedback(world, node, req, ledger::FeedbackRole::Home,
                          static_cast<std::uint8_t>(label));
        }
      },
      message);
}

void Federation::on_chain_update(sim::World& world, std::size_t node) {
  auto it = awaiting_.find(node);
  if (it == awaiting_.end() || it->second.empty()) return;
  const std::vector<std::uint64_t> ids(it->second.begin(), it->second.end());
  for (std::uint64_t id : ids) try_grant(world, node, requests_[id]);
}

void Federation::handle_action(sim::World& world, const Action& action) {
  world.log().emit(LogLevel::Info, world.now(), std::nullopt, "action",
                   {{"action", action_name(action.kind)}});
  auto fail = [&](const std::string& why) {
    world.log().emit(LogLevel::Warn, world.now(), std::nullopt, "action_failed",
                     {{"action", action_name(action.kind)}, {"error", why}});
  };
  auto unknown_csp_request = [&](const std::string& user) {
    AccessRequest& req = new_request();
    req.label = action.id;
    req.user = user;
    req.resource_name = action.resource;
    req.home = SIZE_MAX;
    req.foreign = SIZE_MAX;
    req.issued_at = world.now();
    if (!req.label.empty()) request_labels_[req.label] = req.id;
    set_state(world, req, RequestState::Denied, DenyReason::UnknownCsp);
  };

  switch (action.kind) {
    case ActionKind::RegisterCsp: {
      auto id = world.find_node(action.node);
      if (!id) return fail("unknown node " + action.node);
      sim::Node& n = world.node(*id);
      const auto tx = ledger::build_register_tx(
          n.keys, action.omega1.value_or(n.spec.omega1), action.omega2.value_or(n.spec.omega2),
          action.stake.value_or(n.spec.stake), world.next_links(*id).prev_tx);
      world.submit_tx(*id, tx);
      return;
    }
    case ActionKind::RegisterUser: {
      auto home = world.find_node(action.home);
      if (!home) return fail("unknown home " + action.home);
      register_user(world, action.user, *home, action.profile);
      return;
    }
    case ActionKind::RequestAccess: {
      auto foreign = world.find_node(action.foreign);
      if (!foreign) return unknown_csp_request(action.user);
      request_access(world, action.user, *foreign, action.resource, action);
      return;
    }
    case ActionKind::IaasShare: {
      auto borrower = world.find_node(action.borrower);
      auto lender = world.find_node(action.foreign);
      if (!borrower || !lender) return unknown_csp_request(action.borrower);
      iaas_share(world, *borrower, *lender, action.resource, action);
      return;
    }
    case ActionKind::Feedback: {
      auto rater = world.find_node(action.node);
      if (!rater) return fail("unknown rater " + action.node);
      auto it = request_labels_.find(action.request);
      if (it == request_labels_.end()) return fail("unknown request " + action.request);
      const AccessRequest& req = requests_[it->second];
      if (!req.token_id) return fail("request " + action.request + " has no token");
      ledger::FeedbackRole role = action.role.value_or(
          *rater == req.home ? ledger::FeedbackRole::Home : ledger::FeedbackRole::Foreign);
      std::uint8_t label = 0;
      if (role == ledger::FeedbackRole::Foreign) {
        auto parsed = trust::parse_cred_label(action.label);
        if (!parsed) return fail("bad credibility label " + action.label);
        label = static_cast<std::uint8_t>(*parsed);
      } else {
        auto parsed = trust::parse_sat_label(action.label);
        if (!parsed) return fail("bad satisfaction label " + action.label);
        label = static_cast<std::uint8_t>(*parsed);
      }
      submit_feedback(world, *rater, req, role, label);
      return;
    }
  }
}

}  // namespace ctsim::federation
