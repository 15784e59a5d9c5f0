#pragma once

#include <deque>
#include <map>
#include <string>

#include "p3ls/errors.hpp"
#include "p3ls/transcript.hpp"
#include "p3ls/types.hpp"

namespace p3ls::fed {

/// A protocol message: transcript metadata plus either a matrix or a scalar
/// payload (SS_RESIDUAL carries a scalar, everything else a matrix).
struct Message {
  TranscriptRecord meta;
  Matrix payload;
  double scalar = 0.0;
};

/// Party-addressed message delivery with per-receiver FIFO ordering. Every
/// send is logged to the bound transcript.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Message& message) = 0;
  virtual Message receive(const PartyId& receiver, Tag expected) = 0;
};

/// Reference transport: synchronous in-process queues, single-threaded.
class InProcessBus : public Transport {
 public:
  explicit InProcessBus(ProtocolTranscript& transcript) : transcript_(transcript) {}

  void send(const Message& message) override {
    transcript_.append(message.meta);
    queues_[to_string(message.meta.receiver)].push_back(message);
  }

  Message receive(const PartyId& receiver, Tag expected) override {
    auto& queue = queues_[to_string(receiver)];
    if (queue.empty())
      throw Error("no pending message for " + to_string(receiver));
    Message message = std::move(queue.front());
    queue.pop_front();
    if (message.meta.tag != expected)
      throw Error(std::string("expected ") + to_string(expected) + " for " +
                  to_string(receiver) + ", got " + to_string(message.meta.tag));
    return message;
  }

 private:
  ProtocolTranscript& transcript_;
  std::map<std::string, std::deque<Message>> queues_;
};

}  // namespace p3ls::fed
