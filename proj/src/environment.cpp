#include "shapkit/environment.hpp"

#include "shapkit/error.hpp"
#include "shapkit/escape_room.hpp"
#include "shapkit/raid_battle.hpp"

namespace shapkit {

std::unique_ptr<Environment> make_environment(std::string_view env_id, const nlohmann::json& config) {
  if (env_id == escape::kEnvId) return std::make_unique<escape::EscapeRoomEnv>();
  if (env_id == raid::kEnvId) {
    return std::make_unique<raid::RaidBattleEnv>(raid::RaidConfig::from_json(config.is_null() ? nlohmann::json::object() : config));
  }
  throw InvalidArgument("unknown environment '" + std::string(env_id) + "'");
}

}  // namespace shapkit
