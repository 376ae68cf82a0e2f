#pragma once

#include "json.hpp"

#include "fcnbc/bc_strategy.hpp"
#include "fcnbc/msnet.hpp"
#include "fcnbc/record_io.hpp"
#include "fcnbc/train.hpp"

namespace fcnbc {

void to_json(nlohmann::json& j, const BankSpec& b);
void from_json(const nlohmann::json& j, BankSpec& b);
void to_json(nlohmann::json& j, const MSNetConfig& c);
void from_json(const nlohmann::json& j, MSNetConfig& c);
void to_json(nlohmann::json& j, const StrategyConfig& s);
void from_json(const nlohmann::json& j, StrategyConfig& s);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const DatasetSpec& s);
void from_json(const nlohmann::json& j, DatasetSpec& s);
void to_json(nlohmann::json& j, const TrainerState& s);
void from_json(const nlohmann::json& j, TrainerState& s);

}  // namespace fcnbc
