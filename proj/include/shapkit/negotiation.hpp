#pragma once

// Tagged negotiation messages and a round-robin bargaining session.
//
// Grammar (the frame is always <s>...</s>):
//   <s>I propose to {action}</s>
//   <s>I propose transferring {amount} because {reasoning}</s>
//   <s>I agree because {reasoning}</s>
//   <s>I disagree because {reasoning}</s>
//   <s>I counter-propose transferring {amount} because {reasoning}</s>
//
// Amounts are signed: positive means the speaker pays, negative means the
// speaker asks to receive.

#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapkit/error.hpp"

namespace shapkit {

struct Intent {
  std::string action;
  friend bool operator==(const Intent&, const Intent&) = default;
};

struct TransferProposal {
  double amount = 0.0;
  std::string reasoning;
  friend bool operator==(const TransferProposal&, const TransferProposal&) = default;
};

enum class Stance { kAgree, kDisagree, kCounterPropose };

std::string_view to_string(Stance s);

struct Response {
  Stance stance = Stance::kAgree;
  std::string reasoning;
  std::optional<TransferProposal> counter;  // present iff stance == kCounterPropose
  friend bool operator==(const Response&, const Response&) = default;
};

using NegotiationMessage = std::variant<Intent, TransferProposal, Response>;

Response agree(std::string reasoning);
Response disagree(std::string reasoning);
Response counter_propose(double amount, std::string reasoning);

/// Throws FrameError for tag problems and GrammarError for unknown bodies.
NegotiationMessage parse_message(std::string_view text);

/// Bit-exact tagged form. Amounts use the shortest round-trip decimal.
std::string render_message(const NegotiationMessage& m);

/// First <s>...</s> span inside free text (e.g. a model reply), if any.
std::optional<std::string> extract_tagged(std::string_view text);

nlohmann::json message_to_json(const NegotiationMessage& m);

enum class SessionStatus { kOpen, kAgreed, kTimedOut };

std::string_view to_string(SessionStatus s);

struct TranscriptEntry {
  int round = 0;
  int sender = 0;
  NegotiationMessage message;
};

struct Agreement {
  int proposer = 0;
  TransferProposal proposal;
  /// Latest amount each participant put on the table, in participant order.
  std::vector<std::optional<double>> claims;
};

/// Multi-round session. Participants speak in fixed round-robin order; a round
/// ends when every participant has spoken (or passed). Agreement is unanimous:
/// every participant other than the standing proposer must `agree` after the
/// standing proposal was made. A counter-proposal replaces the standing
/// proposal and clears earlier agrees.
class Session {
 public:
  Session(std::vector<int> participants, int max_rounds);

  const std::vector<int>& participants() const { return participants_; }
  int max_rounds() const { return max_rounds_; }
  int round() const { return round_; }
  SessionStatus status() const { return status_; }
  bool open() const { return status_ == SessionStatus::kOpen; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  const std::optional<Agreement>& agreement() const { return agreement_; }
  /// Latest amount each participant proposed, in participant order.
  const std::vector<std::optional<double>>& claims() const { return claims_; }

  /// The participant whose turn it is.
  int next_speaker() const { return participants_[turn_]; }

  /// Standing proposal, if any: (proposer, proposal).
  std::optional<std::pair<int, TransferProposal>> standing() const;

  void advance(int sender, const NegotiationMessage& m);

  /// The sender gives up its turn without adding to the transcript.
  void pass(int sender);

  /// JSONL export: {"round", "sender", "raw", "parsed"} per line.
  void write_jsonl(std::ostream& out) const;

 private:
  std::size_t index_of(int sender) const;
  void check_turn(int sender) const;
  void end_turn();

  std::vector<int> participants_;
  int max_rounds_;
  int round_ = 1;
  std::size_t turn_ = 0;
  SessionStatus status_ = SessionStatus::kOpen;
  std::vector<TranscriptEntry> transcript_;

  std::optional<std::size_t> proposer_;  // participant index
  TransferProposal proposal_;
  std::vector<bool> agreed_;
  std::vector<std::optional<double>> claims_;
  std::optional<Agreement> agreement_;
};

/// Value-semantics form: returns the advanced copy.
Session advance(Session s, int sender, const NegotiationMessage& m);

}  // namespace shapkit
