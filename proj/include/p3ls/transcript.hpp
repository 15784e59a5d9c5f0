#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "p3ls/types.hpp"

namespace p3ls::fed {

enum class Role { Ta, Csp, Fc, Lc };

struct PartyId {
  Role role = Role::Ta;
  int index = 0;  // FC index (1-based); 0 for TA/CSP/LC

  static PartyId ta() { return {Role::Ta, 0}; }
  static PartyId csp() { return {Role::Csp, 0}; }
  static PartyId fc(int i) { return {Role::Fc, i}; }
  static PartyId lc() { return {Role::Lc, 0}; }

  bool operator==(const PartyId&) const = default;
};

std::string to_string(const PartyId& id);
PartyId party_from_string(const std::string& s);

enum class Phase { Training, Recovery, Contribution, Inference };

const char* to_string(Phase phase);
Phase phase_from_string(const std::string& s);

enum class Tag {
  KeyA,
  KeyHi,
  KeyG,
  KeyN,
  KeyM,
  MaskedX,
  MaskedY,
  MaskedT,
  MaskedU,
  MaskedQ,
  MaskedHi,
  MaskedGt,
  MaskedWi,
  MaskedPi,
  MaskedBi,
  MaskedYhat,
  SsResidual,
};

const char* to_string(Tag tag);
Tag tag_from_string(const std::string& s);

/// One logged message. `owner` identifies whose per-party component the
/// payload is (FC index), or -1 when not party-specific.
struct TranscriptRecord {
  PartyId sender;
  PartyId receiver;
  Tag tag = Tag::KeyA;
  Index rows = 0;
  Index cols = 0;
  Phase phase = Phase::Training;
  int owner = -1;

  bool operator==(const TranscriptRecord&) const = default;
};

/// Append-only ordered log of every protocol message.
class ProtocolTranscript {
 public:
  void append(const TranscriptRecord& record) { records_.push_back(record); }
  const std::vector<TranscriptRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  /// One JSON object per line.
  void to_jsonl(std::ostream& out) const;
  static ProtocolTranscript from_jsonl(std::istream& in);

 private:
  std::vector<TranscriptRecord> records_;
};

/// Checks every message against the per-role visibility rules. Each entry of
/// the returned list describes one offending message; empty means pass.
std::vector<std::string> audit_views(const ProtocolTranscript& transcript);

}  // namespace p3ls::fed
