#include <catch2/catch_amalgamated.hpp>

#include "ctxguard/record.hpp"

using namespace ctxguard;

namespace {

Record random_record(Rng& rng) {
    Record r;
    r.id = "b" + std::to_string(rng.uniform_index(1000)) + "-" +
           std::to_string(rng.uniform_index(100000));
    r.domain = static_cast<Domain>(rng.uniform_index(3));
    r.question = "What about case " + std::to_string(rng.uniform_index(1 << 30)) + "?";
    r.answer = "Answer text " + std::to_string(rng.uniform_index(1 << 30)) + ".";
    r.label = static_cast<Label>(rng.uniform_index(3));
    r.source = rng.uniform() < 0.5 ? "seed-corpus" : "batch-7";
    if (rng.uniform() < 0.7) r.generator = "mock-model";
    if (r.label == Label::unsafe_ || rng.uniform() < 0.3) {
        AxisAssignment a;
        const int k = 2 + static_cast<int>(rng.uniform_index(3));
        while (static_cast<int>(a.qi_types.size()) < k)
            a.qi_types.insert(static_cast<QiClass>(rng.uniform_index(8)));
        a.framing = static_cast<Framing>(rng.uniform_index(6));
        a.placement = static_cast<Placement>(rng.uniform_index(4));
        a.adversarial_mode = static_cast<AdversarialMode>(rng.uniform_index(4));
        r.axes = a;
    }
    if (r.label == Label::borderline_safe || rng.uniform() < 0.2)
        r.subtype = static_cast<BorderlineSubtype>(rng.uniform_index(5));
    if (rng.uniform() < 0.3) r.extra["note"] = "kept-on-roundtrip";
    return r;
}

}  // namespace

TEST_CASE("parse well-formed unsafe record with axes") {
    const std::string line = R"({"answer":"A 52-year-old engineer.","axes":{)"
        R"("adversarial_mode":"none","framing":"case_voice","placement":"frame_opening",)"
        R"("qi_types":["age","occupation"]},"domain":"medical","generator":"qwen",)"
        R"("id":"m-1","label":"unsafe","question":"Summarize the case.","source":"batch-1"})";
    const Record r = parse_record(line);
    CHECK(r.label == Label::unsafe_);
    REQUIRE(r.axes.has_value());
    CHECK(r.axes->qi_types.size() == 2);
    CHECK(r.axes->qi_types.count(QiClass::age) == 1);
}

TEST_CASE("unsafe record without axes is rejected") {
    const std::string line =
        R"({"answer":"x","domain":"medical","id":"m-2","label":"unsafe",)"
        R"("question":"q","source":"s"})";
    CHECK_THROWS_WITH(parse_record(line),
                      Catch::Matchers::ContainsSubstring("axes required"));
}

TEST_CASE("borderline record without subtype is rejected") {
    const std::string line =
        R"({"answer":"x","domain":"law","id":"l-1","label":"borderline_safe",)"
        R"("question":"q","source":"s"})";
    CHECK_THROWS_AS(parse_record(line), ValidationError);
}

TEST_CASE("empty question after trimming is rejected") {
    const std::string line =
        R"({"answer":"x","domain":"law","id":"l-2","label":"safe",)"
        R"("question":"  \n ","source":"s"})";
    CHECK_THROWS_WITH(parse_record(line),
                      Catch::Matchers::ContainsSubstring("question"));
}

TEST_CASE("malformed syntax reports a parse error with offset") {
    CHECK_THROWS_AS(parse_record("{\"id\": \"x\", nope}"), ParseError);
}

TEST_CASE("serialization is canonical under input key order") {
    const std::string a =
        R"({"id":"x-1","domain":"finance","question":"q","answer":"a","label":"safe","source":"s"})";
    const std::string b =
        R"({"source":"s","label":"safe","answer":"a","question":"q","domain":"finance","id":"x-1"})";
    CHECK(serialize_record(parse_record(a)) == serialize_record(parse_record(b)));
}

TEST_CASE("serialized record is a single line without trailing newline") {
    Rng rng(7);
    const Record r = random_record(rng);
    const std::string s = serialize_record(r);
    CHECK(s.find('\n') == std::string::npos);
    CHECK(!s.empty());
}

TEST_CASE("unknown keys are preserved on round-trip") {
    const std::string line =
        R"({"answer":"a","custom_tag":{"x":1},"domain":"law","id":"l-3",)"
        R"("label":"safe","question":"q","source":"s"})";
    const Record r = parse_record(line);
    CHECK(r.extra.contains("custom_tag"));
    CHECK(serialize_record(r) == line);
}

TEST_CASE("round-trip: parse after serialize is identity on 1000 random records") {
    Rng rng(20260823);
    for (int i = 0; i < 1000; ++i) {
        const Record r = random_record(rng);
        const std::string line = serialize_record(r);
        const Record back = parse_record(line);
        REQUIRE(back == r);
        REQUIRE(serialize_record(back) == line);  // byte-identical second pass
    }
}

TEST_CASE("serialize after parse canonicalizes a valid line") {
    // same content, scrambled order and extra whitespace in the input
    const std::string messy =
        R"({ "question": "q",  "id": "x-9", "label": "safe", "domain": "medical", "answer": "a", "source": "s" })";
    const std::string canon = serialize_record(parse_record(messy));
    CHECK(canon ==
          R"({"answer":"a","domain":"medical","id":"x-9","label":"safe","question":"q","source":"s"})");
}

TEST_CASE("enum closure: unknown axis levels are rejected") {
    const std::string line =
        R"({"answer":"a","axes":{"framing":"sonnet_form","qi_types":["age","family"]},)"
        R"("domain":"medical","id":"m-9","label":"unsafe","question":"q","source":"s"})";
    CHECK_THROWS_WITH(parse_record(line),
                      Catch::Matchers::ContainsSubstring("framing"));
}

TEST_CASE("qi display mapping is total across domains") {
    for (int d = 0; d < 3; ++d) {
        for (int q = 0; q < kQiClassCount; ++q) {
            CHECK(qi_display_name(static_cast<Domain>(d), static_cast<QiClass>(q)) !=
                  nullptr);
        }
    }
    CHECK(std::string(qi_display_name(Domain::medical, QiClass::domain_specific_1)) ==
          "Condition");
    CHECK(std::string(qi_display_name(Domain::finance, QiClass::domain_specific_2)) ==
          "Income Band");
}
