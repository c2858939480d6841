#include <algorithm>

#include "saflbench/error.hpp"
#include "saflbench/protocol.hpp"

namespace saflbench {

Server::Server(ParamVector initial, int k, double eta, Strategy strategy,
               Mode mode)
    : state_{std::move(initial), 0, {}, k, eta, strategy, mode} {
  if (k < 1) {
    throw ConfigError("run.k", "must be positive");
  }
}

void Server::receive(Update update) {
  if (update.kind != update_kind_for(state_.strategy)) {
    throw ProtocolError("update kind does not match the configured strategy");
  }
  if (update.base_round > state_.round) {
    throw ProtocolError("update from client " + std::to_string(update.client_id) +
                        " claims a base round ahead of the server");
  }
  if (!(update.payload.spec() == state_.global.spec())) {
    throw DimensionError("update payload does not match the global model");
  }
  if (state_.mode == Mode::Synchronous &&
      state_.buffer.size() >= static_cast<std::size_t>(state_.k)) {
    throw ProtocolError("synchronous buffer already holds K updates");
  }
  state_.buffer.push_back(std::move(update));
}

bool Server::ready() const noexcept {
  return state_.buffer.size() >= static_cast<std::size_t>(state_.k);
}

AggregationOutcome Server::aggregate() {
  if (!ready()) {
    throw ProtocolError("aggregation requested with fewer than K buffered updates");
  }
  auto& buffer = state_.buffer;
  std::stable_sort(buffer.begin(), buffer.end(), [](const Update& a, const Update& b) {
    if (a.arrival_time != b.arrival_time) {
      return a.arrival_time < b.arrival_time;
    }
    return a.client_id < b.client_id;
  });
  const auto k = static_cast<std::ptrdiff_t>(state_.k);
  AggregationOutcome outcome;
  outcome.consumed.assign(std::make_move_iterator(buffer.begin()),
                          std::make_move_iterator(buffer.begin() + k));
  buffer.erase(buffer.begin(), buffer.begin() + k);

  const int next_round = state_.round + 1;
  outcome.tau_total = accumulated_staleness(outcome.consumed, next_round);
  state_.global = state_.strategy == Strategy::FedSgd
                      ? aggregate_fedsgd(outcome.consumed, state_.global, state_.eta)
                      : aggregate_fedavg(outcome.consumed);
  state_.round = next_round;
  outcome.round = next_round;
  return outcome;
}

}  // namespace saflbench
