#include "shapkit/negotiation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

namespace shapkit {

namespace {

constexpr std::string_view kOpen = "<s>";
constexpr std::string_view kClose = "</s>";
constexpr std::string_view kIntent = "I propose to ";
constexpr std::string_view kTransfer = "I propose transferring ";
constexpr std::string_view kCounter = "I counter-propose transferring ";
constexpr std::string_view kAgree = "I agree because ";
constexpr std::string_view kDisagree = "I disagree because ";
constexpr std::string_view kBecause = " because ";

std::string format_amount(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

// "<amount> because <reasoning>"
TransferProposal parse_amount_clause(std::string_view rest, std::string_view body) {
  const auto sep = rest.find(kBecause);
  if (sep == std::string_view::npos) throw GrammarError("expected 'because' after amount", std::string(rest));
  const std::string_view num = rest.substr(0, sep);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), v);
  if (num.empty() || ec != std::errc{} || ptr != num.data() + num.size() || !std::isfinite(v)) {
    throw GrammarError("amount is not a finite number", std::string(num));
  }
  (void)body;
  return TransferProposal{v, std::string(rest.substr(sep + kBecause.size()))};
}

}  // namespace

std::string_view to_string(Stance s) {
  switch (s) {
    case Stance::kAgree:
      return "agree";
    case Stance::kDisagree:
      return "disagree";
    case Stance::kCounterPropose:
      return "counter-propose";
  }
  return "?";
}

std::string_view to_string(SessionStatus s) {
  switch (s) {
    case SessionStatus::kOpen:
      return "open";
    case SessionStatus::kAgreed:
      return "agreed";
    case SessionStatus::kTimedOut:
      return "timed_out";
  }
  return "?";
}

Response agree(std::string reasoning) { return Response{Stance::kAgree, std::move(reasoning), std::nullopt}; }
Response disagree(std::string reasoning) { return Response{Stance::kDisagree, std::move(reasoning), std::nullopt}; }
Response counter_propose(double amount, std::string reasoning) {
  return Response{Stance::kCounterPropose, reasoning, TransferProposal{amount, reasoning}};
}

NegotiationMessage parse_message(std::string_view text) {
  if (!text.starts_with(kOpen)) throw FrameError("message does not start with <s>");
  if (!text.ends_with(kClose) || text.size() < kOpen.size() + kClose.size()) {
    throw FrameError("message does not end with </s>");
  }
  const std::string_view body = text.substr(kOpen.size(), text.size() - kOpen.size() - kClose.size());
  if (body.find(kOpen) != std::string_view::npos || body.find(kClose) != std::string_view::npos) {
    throw FrameError("nested or mismatched <s>/</s> tags");
  }

  if (body.starts_with(kTransfer)) return parse_amount_clause(body.substr(kTransfer.size()), body);
  if (body.starts_with(kIntent)) {
    std::string_view action = body.substr(kIntent.size());
    if (action.empty()) throw GrammarError("intent has an empty action", std::string(body));
    return Intent{std::string(action)};
  }
  if (body.starts_with(kAgree)) return agree(std::string(body.substr(kAgree.size())));
  if (body.starts_with(kDisagree)) return disagree(std::string(body.substr(kDisagree.size())));
  if (body.starts_with(kCounter)) {
    TransferProposal tp = parse_amount_clause(body.substr(kCounter.size()), body);
    return Response{Stance::kCounterPropose, tp.reasoning, tp};
  }
  if (body.starts_with("I counter-propose because ")) {
    throw GrammarError("counter-proposal carries no amount", std::string(body));
  }
  throw GrammarError("unrecognized message template", std::string(body));
}

std::string render_message(const NegotiationMessage& m) {
  std::string body = std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Intent>) {
          return std::string(kIntent) + v.action;
        } else if constexpr (std::is_same_v<T, TransferProposal>) {
          return std::string(kTransfer) + format_amount(v.amount) + std::string(kBecause) + v.reasoning;
        } else {
          switch (v.stance) {
            case Stance::kAgree:
              return std::string(kAgree) + v.reasoning;
            case Stance::kDisagree:
              return std::string(kDisagree) + v.reasoning;
            case Stance::kCounterPropose: {
              const double amount = v.counter ? v.counter->amount : 0.0;
              return std::string(kCounter) + format_amount(amount) + std::string(kBecause) + v.reasoning;
            }
          }
          return {};
        }
      },
      m);
  return std::string(kOpen) + body + std::string(kClose);
}

std::optional<std::string> extract_tagged(std::string_view text) {
  const auto open = text.find(kOpen);
  if (open == std::string_view::npos) return std::nullopt;
  const auto close = text.find(kClose, open + kOpen.size());
  if (close == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(open, close + kClose.size() - open));
}

nlohmann::json message_to_json(const NegotiationMessage& m) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Intent>) {
          return {{"type", "intent"}, {"action", v.action}};
        } else if constexpr (std::is_same_v<T, TransferProposal>) {
          return {{"type", "transfer"}, {"amount", v.amount}, {"reasoning", v.reasoning}};
        } else {
          nlohmann::json j{{"type", "response"}, {"stance", std::string(to_string(v.stance))}, {"reasoning", v.reasoning}};
          if (v.counter) j["counter"] = {{"amount", v.counter->amount}, {"reasoning", v.counter->reasoning}};
          return j;
        }
      },
      m);
}

Session::Session(std::vector<int> participants, int max_rounds)
    : participants_(std::move(participants)), max_rounds_(max_rounds) {
  if (participants_.empty()) throw InvalidArgument("session needs at least one participant");
  if (max_rounds_ < 1) throw InvalidArgument("max_rounds must be positive");
  auto sorted = participants_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw InvalidArgument("duplicate session participant");
  }
  agreed_.assign(participants_.size(), false);
  claims_.assign(participants_.size(), std::nullopt);
}

std::optional<std::pair<int, TransferProposal>> Session::standing() const {
  if (!proposer_) return std::nullopt;
  return std::make_pair(participants_[*proposer_], proposal_);
}

std::size_t Session::index_of(int sender) const {
  auto it = std::find(participants_.begin(), participants_.end(), sender);
  if (it == participants_.end()) throw InvalidArgument("agent " + std::to_string(sender) + " is not in the session");
  return static_cast<std::size_t>(it - participants_.begin());
}

void Session::check_turn(int sender) const {
  if (status_ != SessionStatus::kOpen) {
    throw SessionClosedError(std::string("session is ") + std::string(to_string(status_)));
  }
  const std::size_t idx = index_of(sender);
  if (idx != turn_) {
    throw ProtocolError("agent " + std::to_string(sender) + " spoke out of turn; expected agent " +
                        std::to_string(participants_[turn_]));
  }
}

void Session::end_turn() {
  if (status_ != SessionStatus::kOpen) return;
  if (++turn_ == participants_.size()) {
    turn_ = 0;
    if (round_ == max_rounds_) {
      status_ = SessionStatus::kTimedOut;
    } else {
      ++round_;
    }
  }
}

void Session::advance(int sender, const NegotiationMessage& m) {
  check_turn(sender);
  const std::size_t idx = turn_;
  transcript_.push_back(TranscriptEntry{round_, sender, m});

  auto set_proposal = [&](const TransferProposal& p) {
    proposer_ = idx;
    proposal_ = p;
    claims_[idx] = p.amount;
    std::fill(agreed_.begin(), agreed_.end(), false);
  };

  if (const auto* tp = std::get_if<TransferProposal>(&m)) {
    set_proposal(*tp);
  } else if (const auto* r = std::get_if<Response>(&m)) {
    switch (r->stance) {
      case Stance::kAgree:
        if (proposer_ && *proposer_ != idx) agreed_[idx] = true;
        break;
      case Stance::kDisagree:
        agreed_[idx] = false;
        break;
      case Stance::kCounterPropose:
        if (!r->counter) throw InvalidArgument("counter-proposal without an amount");
        set_proposal(*r->counter);
        break;
    }
  }

  if (proposer_ && participants_.size() > 1) {
    bool all = true;
    for (std::size_t k = 0; k < participants_.size(); ++k) {
      if (k != *proposer_ && !agreed_[k]) {
        all = false;
        break;
      }
    }
    if (all) {
      status_ = SessionStatus::kAgreed;
      agreement_ = Agreement{participants_[*proposer_], proposal_, claims_};
      return;
    }
  }
  end_turn();
}

void Session::pass(int sender) {
  check_turn(sender);
  end_turn();
}

void Session::write_jsonl(std::ostream& out) const {
  for (const auto& e : transcript_) {
    nlohmann::json line{{"round", e.round},
                        {"sender", e.sender},
                        {"raw", render_message(e.message)},
                        {"parsed", message_to_json(e.message)}};
    out << line.dump() << '\n';
  }
}

Session advance(Session s, int sender, const NegotiationMessage& m) {
  s.advance(sender, m);
  return s;
}

}  // namespace shapkit
