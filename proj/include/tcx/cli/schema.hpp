#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace tcx::cli {

struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Validator for the JSON Schema keywords the shipped config schema uses:
/// type, enum, properties, required, additionalProperties (boolean), items,
/// minItems, maxItems, minimum, maximum, exclusiveMinimum, exclusiveMaximum,
/// minLength and $ref to "#/definitions/...". Anything else is rejected so a
/// schema edit cannot silently widen what gets accepted.
class SchemaValidator {
public:
    explicit SchemaValidator(nlohmann::json schema) : root_(std::move(schema)) { check_keywords(root_, "#"); }

    void validate(const nlohmann::json& doc) const { walk(root_, doc, "$"); }

private:
    nlohmann::json root_;

    static void check_keywords(const nlohmann::json& s, const std::string& where) {
        static const char* known[] = {"$schema", "$id",  "title",    "description", "type",    "enum",
                                      "properties", "required", "additionalProperties", "items", "minItems",
                                      "maxItems", "minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum",
                                      "minLength", "$ref", "definitions", "default"};
        if (!s.is_object()) throw SchemaError("schema node " + where + " is not an object");
        for (const auto& [key, val] : s.items()) {
            bool ok = false;
            for (const char* k : known) ok = ok || key == k;
            if (!ok) throw SchemaError("schema keyword '" + key + "' at " + where + " is not supported");
            if (key == "properties" || key == "definitions")
                for (const auto& [name, sub] : val.items()) check_keywords(sub, where + "/" + key + "/" + name);
            if (key == "items") check_keywords(val, where + "/items");
        }
    }

    const nlohmann::json& resolve(const nlohmann::json& s) const {
        if (!s.contains("$ref")) return s;
        const std::string ref = s["$ref"];
        const std::string prefix = "#/definitions/";
        if (ref.rfind(prefix, 0) != 0) throw SchemaError("unsupported $ref " + ref);
        const auto& defs = root_.at("definitions");
        const auto name = ref.substr(prefix.size());
        if (!defs.contains(name)) throw SchemaError("unresolved $ref " + ref);
        return resolve(defs[name]);
    }

    static bool has_type(const nlohmann::json& v, const std::string& t) {
        if (t == "object") return v.is_object();
        if (t == "array") return v.is_array();
        if (t == "string") return v.is_string();
        if (t == "boolean") return v.is_boolean();
        if (t == "null") return v.is_null();
        if (t == "number") return v.is_number();
        if (t == "integer") return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
        throw SchemaError("unknown type '" + t + "'");
    }

    void walk(const nlohmann::json& raw, const nlohmann::json& v, const std::string& path) const {
        const auto& s = resolve(raw);
        auto fail = [&](const std::string& what) { throw SchemaError(path + ": " + what); };
        if (s.contains("type")) {
            bool ok = false;
            if (s["type"].is_array()) {
                for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
            } else {
                ok = has_type(v, s["type"].get<std::string>());
            }
            if (!ok) fail("expected type " + s["type"].dump());
        }
        if (s.contains("enum")) {
            bool ok = false;
            for (const auto& e : s["enum"]) ok = ok || e == v;
            if (!ok) fail("value " + v.dump() + " not in " + s["enum"].dump());
        }
        if (v.is_number()) {
            const double x = v.get<double>();
            if (s.contains("minimum") && x < s["minimum"].get<double>()) fail("below minimum " + s["minimum"].dump());
            if (s.contains("maximum") && x > s["maximum"].get<double>()) fail("above maximum " + s["maximum"].dump());
            if (s.contains("exclusiveMinimum") && !(x > s["exclusiveMinimum"].get<double>()))
                fail("must exceed " + s["exclusiveMinimum"].dump());
            if (s.contains("exclusiveMaximum") && !(x < s["exclusiveMaximum"].get<double>()))
                fail("must be below " + s["exclusiveMaximum"].dump());
        }
        if (v.is_string() && s.contains("minLength") && v.get<std::string>().size() < s["minLength"].get<std::size_t>())
            fail("string too short");
        if (v.is_array()) {
            if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) fail("too few items");
            if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) fail("too many items");
            if (s.contains("items"))
                for (std::size_t j = 0; j < v.size(); ++j) walk(s["items"], v[j], path + "[" + std::to_string(j) + "]");
        }
        if (v.is_object()) {
            if (s.contains("required"))
                for (const auto& r : s["required"])
                    if (!v.contains(r.get<std::string>())) fail("missing required key '" + r.get<std::string>() + "'");
            const bool closed = s.contains("additionalProperties") && s["additionalProperties"] == false;
            for (const auto& [key, val] : v.items()) {
                if (s.contains("properties") && s["properties"].contains(key)) {
                    walk(s["properties"][key], val, path + "." + key);
                } else if (closed) {
                    fail("unknown key '" + key + "'");
                }
            }
        }
    }
};

}  // namespace tcx::cli
