#include "p3ls/transcript.hpp"

#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "p3ls/errors.hpp"

namespace p3ls::fed {

std::string to_string(const PartyId& id) {
  switch (id.role) {
    case Role::Ta: return "TA";
    case Role::Csp: return "CSP";
    case Role::Fc: return "FC" + std::to_string(id.index);
    case Role::Lc: return "LC";
  }
  return "?";
}

PartyId party_from_string(const std::string& s) {
  if (s == "TA") return PartyId::ta();
  if (s == "CSP") return PartyId::csp();
  if (s == "LC") return PartyId::lc();
  if (s.rfind("FC", 0) == 0) return PartyId::fc(std::stoi(s.substr(2)));
  throw Error("unknown party id: " + s);
}

const char* to_string(Phase phase) {
  switch (phase) {
    case Phase::Training: return "training";
    case Phase::Recovery: return "recovery";
    case Phase::Contribution: return "contribution";
    case Phase::Inference: return "inference";
  }
  return "?";
}

Phase phase_from_string(const std::string& s) {
  if (s == "training") return Phase::Training;
  if (s == "recovery") return Phase::Recovery;
  if (s == "contribution") return Phase::Contribution;
  if (s == "inference") return Phase::Inference;
  throw Error("unknown phase: " + s);
}

const char* to_string(Tag tag) {
  switch (tag) {
    case Tag::KeyA: return "KEY_A";
    case Tag::KeyHi: return "KEY_HI";
    case Tag::KeyG: return "KEY_G";
    case Tag::KeyN: return "KEY_N";
    case Tag::KeyM: return "KEY_M";
    case Tag::MaskedX: return "MASKED_X";
    case Tag::MaskedY: return "MASKED_Y";
    case Tag::MaskedT: return "MASKED_T";
    case Tag::MaskedU: return "MASKED_U";
    case Tag::MaskedQ: return "MASKED_Q";
    case Tag::MaskedHi: return "MASKED_HI";
    case Tag::MaskedGt: return "MASKED_GT";
    case Tag::MaskedWi: return "MASKED_W_I";
    case Tag::MaskedPi: return "MASKED_P_I";
    case Tag::MaskedBi: return "MASKED_B_I";
    case Tag::MaskedYhat: return "MASKED_YHAT";
    case Tag::SsResidual: return "SS_RESIDUAL";
  }
  return "?";
}

Tag tag_from_string(const std::string& s) {
  static const Tag all[] = {
      Tag::KeyA,     Tag::KeyHi,    Tag::KeyG,     Tag::KeyN,     Tag::KeyM,
      Tag::MaskedX,  Tag::MaskedY,  Tag::MaskedT,  Tag::MaskedU,  Tag::MaskedQ,
      Tag::MaskedHi, Tag::MaskedGt, Tag::MaskedWi, Tag::MaskedPi, Tag::MaskedBi,
      Tag::MaskedYhat, Tag::SsResidual};
  for (Tag t : all)
    if (s == to_string(t)) return t;
  throw Error("unknown payload tag: " + s);
}

void ProtocolTranscript::to_jsonl(std::ostream& out) const {
  for (const TranscriptRecord& r : records_) {
    nlohmann::json j{{"phase", to_string(r.phase)},
                     {"sender", to_string(r.sender)},
                     {"receiver", to_string(r.receiver)},
                     {"tag", to_string(r.tag)},
                     {"rows", r.rows},
                     {"cols", r.cols},
                     {"owner", r.owner}};
    out << j.dump() << '\n';
  }
}

ProtocolTranscript ProtocolTranscript::from_jsonl(std::istream& in) {
  ProtocolTranscript transcript;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    TranscriptRecord r;
    r.phase = phase_from_string(j.at("phase").get<std::string>());
    r.sender = party_from_string(j.at("sender").get<std::string>());
    r.receiver = party_from_string(j.at("receiver").get<std::string>());
    r.tag = tag_from_string(j.at("tag").get<std::string>());
    r.rows = j.at("rows").get<Index>();
    r.cols = j.at("cols").get<Index>();
    r.owner = j.value("owner", -1);
    transcript.append(r);
  }
  return transcript;
}

namespace {

bool allowed(const TranscriptRecord& r) {
  const Tag t = r.tag;
  switch (r.receiver.role) {
    case Role::Ta:
      return false;  // the TA only distributes keys, it never receives payloads
    case Role::Csp:
      return t == Tag::MaskedX || t == Tag::MaskedY || t == Tag::MaskedHi ||
             t == Tag::MaskedGt || t == Tag::MaskedYhat;
    case Role::Fc:
      if (t == Tag::KeyA || t == Tag::KeyN || t == Tag::KeyM || t == Tag::MaskedT ||
          t == Tag::SsResidual)
        return true;
      if (t == Tag::KeyHi || t == Tag::MaskedWi || t == Tag::MaskedPi || t == Tag::MaskedBi)
        return r.owner == r.receiver.index;  // only its own share
      return false;
    case Role::Lc:
      return t == Tag::KeyA || t == Tag::KeyG || t == Tag::KeyN || t == Tag::KeyM ||
             t == Tag::MaskedQ || t == Tag::MaskedU || t == Tag::MaskedT ||
             t == Tag::MaskedYhat;
  }
  return false;
}

}  // namespace

std::vector<std::string> audit_views(const ProtocolTranscript& transcript) {
  std::vector<std::string> violations;
  std::size_t index = 0;
  for (const TranscriptRecord& r : transcript.records()) {
    if (!allowed(r)) {
      violations.push_back("message " + std::to_string(index) + " [" + to_string(r.phase) +
                           "] " + to_string(r.sender) + " -> " + to_string(r.receiver) + " " +
                           to_string(r.tag) + " (owner " + std::to_string(r.owner) +
                           ") not permitted for receiver");
    }
    ++index;
  }
  return violations;
}

}  // namespace p3ls::fed
