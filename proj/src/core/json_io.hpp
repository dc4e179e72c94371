#pragma once

// JSON (de)serialization of the configuration types. Readers start from the
// defaults, reject unknown keys and wrong types with a ConfigError naming
// the dotted key path.

#include <json.hpp>

#include <initializer_list>
#include <string>

#include "core/errors.hpp"
#include "core/losses.hpp"
#include "core/model.hpp"
#include "core/nn.hpp"

namespace attrivae::json_io {

using Json = nlohmann::ordered_json;

void require_object(const Json& j, const std::string& where);
void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

double get_double(const Json& j, const std::string& where);
long long get_int(const Json& j, const std::string& where);
bool get_bool(const Json& j, const std::string& where);
std::string get_string(const Json& j, const std::string& where);

Json to_json(const ModelConfig& c);
Json to_json(const LossWeights& w);
Json to_json(const AttributeMapping& m);
Json to_json(const nn::Adam::Settings& s);
Json to_json(const VariantToggles& t);

void read(const Json& j, const std::string& where, ModelConfig& c);
void read(const Json& j, const std::string& where, LossWeights& w);
void read(const Json& j, const std::string& where, AttributeMapping& m);
void read(const Json& j, const std::string& where, nn::Adam::Settings& s);
void read(const Json& j, const std::string& where, VariantToggles& t);

}  // namespace attrivae::json_io
