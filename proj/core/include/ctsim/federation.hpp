#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsim/ledger.hpp"
#include "ctsim/trust.hpp"

namespace ctsim::sim {
class World;
}

namespace ctsim::federation {

using crypto::Address;
using crypto::Digest;

enum class RequestState { Requested, Redirected, TokenIssued, TokenOnChain, Granted, Denied };

enum class DenyReason {
  None,
  UnknownUser,
  UnknownCsp,
  AuthFailed,
  TokenTimeout,
  Expired,
  Audience,
  Resource,
  UserMismatch,
  Privilege,
  Decrypt,
  Replay,
};

std::string_view state_name(RequestState s);
std::string_view deny_name(DenyReason r);

struct UserAccount {
  std::string name;
  Address pseudonym;
  /// Node ids of the home CSPs, in registration order.
  std::vector<std::size_t> homes;
  Bytes profile;
  /// Shared secret per home CSP.
  std::map<std::size_t, Digest> credentials;
};

struct AccessRequest {
  std::uint64_t id = 0;
  std::string label;  // optional scenario-assigned name
  std::string user;
  Address pseudonym;
  std::size_t home = 0;
  std::size_t foreign = 0;
  Address resource;
  std::string resource_name;
  std::vector<std::string> required_privileges;
  Millis issued_at = 0;
  RequestState state = RequestState::Requested;
  DenyReason reason = DenyReason::None;
  std::optional<Digest> token_id;
  bool local = false;
  bool iaas = false;
  bool bad_credential = false;
  /// Set on the cloned request a double issuer presents with an old token.
  std::optional<std::uint64_t> clone_of;
  bool auto_feedback = true;
  trust::CredLabel cred_label = trust::CredLabel::Good;
  trust::SatLabel sat_label = trust::SatLabel::Satisfied;
  Millis granted_at = -1;
};

enum class ActionKind { RegisterCsp, RegisterUser, RequestAccess, IaasShare, Feedback };

std::string_view action_name(ActionKind k);

/// One scripted step. Which fields matter depends on the kind.
struct Action {
  Millis at_ms = 0;
  ActionKind kind = ActionKind::RequestAccess;
  std::string node;  // register_csp target, feedback rater
  std::optional<Fixed> stake;
  std::optional<Fixed> omega1;
  std::optional<Fixed> omega2;
  std::string user;
  std::string home;
  std::string profile;
  std::string foreign;  // request_access target, iaas lender
  std::string borrower;
  std::string resource;
  std::vector<std::string> privileges;
  std::string id;       // request label, referenced by feedback actions
  std::string request;  // feedback: which request
  std::string label;    // feedback label name
  std::optional<ledger::FeedbackRole> role;
  bool bad_credential = false;
  bool auto_feedback = true;
  std::optional<trust::CredLabel> cred_label;
  std::optional<trust::SatLabel> sat_label;
};

/// Messages the user carries between CSPs. They travel with network
/// latency but are not subject to partitions between CSP nodes.
struct AuthRedirect {
  std::uint64_t request = 0;
  Digest credential;
};
struct TokenNotice {
  std::uint64_t request = 0;
  ledger::AccessToken token;
};
struct GrantDeadline {
  std::uint64_t request = 0;
};
struct GrantNotice {
  std::uint64_t request = 0;
};
using Message = std::variant<AuthRedirect, TokenNotice, GrantDeadline, GrantNotice>;

std::string_view message_name(const Message& m);

struct OutcomeCounts {
  std::uint64_t granted = 0;
  std::map<std::string, std::uint64_t> denied;
  std::uint64_t pending = 0;
};

/// The authentication flow: redirect to the home CSP, token issuance on
/// chain, confirmation and grant at the foreign CSP, then feedback.
class Federation {
 public:
  void handle_action(sim::World& world, const Action& action);
  void handle_message(sim::World& world, std::size_t node, const Message& message);
  /// Called after a node's canonical chain changed.
  void on_chain_update(sim::World& world, std::size_t node);

  const std::deque<AccessRequest>& requests() const { return requests_; }
  const std::map<std::string, UserAccount>& users() const { return users_; }
  const UserAccount* find_user(const std::string& name) const;
  OutcomeCounts outcomes() const;

  /// Registers a user with a home CSP directly (also used by actions).
  const UserAccount& register_user(sim::World& world, const std::string& name, std::size_t home,
                                   const std::string& profile);
  /// Starts a cross-CSP request; returns its id.
  std::uint64_t request_access(sim::World& world, const std::string& user, std::size_t foreign,
                               const std::string& resource, const Action& options);
  std::uint64_t iaas_share(sim::World& world, std::size_t borrower, std::size_t lender,
                           const std::string& resource, const Action& options);

 private:
  void set_state(sim::World& world, AccessRequest& req, RequestState state,
                 DenyReason reason = DenyReason::None,
                 nlohmann::json extra = nlohmann::json::object());
  void deny(sim::World& world, AccessRequest& req, DenyReason reason) {
    set_state(world, req, RequestState::Denied, reason);
  }
  void issue_token(sim::World& world, std::size_t home, AccessRequest& req);
  void try_grant(sim::World& world, std::size_t foreign, AccessRequest& req);
  void submit_feedback(sim::World& world, std::size_t rater, const AccessRequest& req,
                       ledger::FeedbackRole role, std::uint8_t label);
  AccessRequest& new_request();
  Digest expected_credential(const sim::World& world, const AccessRequest& req) const;

  std::deque<AccessRequest> requests_;
  std::map<std::string, UserAccount> users_;
  std::map<std::string, std::uint64_t> request_labels_;
  /// Requests waiting at a foreign CSP for their token to confirm.
  std::map<std::size_t, std::set<std::uint64_t>> awaiting_;
  /// Tokens each foreign CSP has already honoured.
  std::map<std::size_t, std::set<Digest>> consumed_;
};

}  // namespace ctsim::federation
