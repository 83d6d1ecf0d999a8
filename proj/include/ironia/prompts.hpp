#pragma once

#include <string>
#include <string_view>

#include "ironia/corpus.hpp"
#include "ironia/detail/text.hpp"
#include "ironia/error.hpp"

namespace ironia {

enum class PromptKind { Classification, Enhancement };
enum class Language { Es, En };

inline Language parse_language(std::string_view s) {
  if (s == "es") return Language::Es;
  if (s == "en") return Language::En;
  throw Error(ErrorCode::ConfigError, "unknown prompt language '" + std::string(s) + "'");
}

inline constexpr std::string_view kTextPlaceholder = "{{TEXT}}";

namespace prompts {

// Four blocks: context, the three contradiction scenarios, the three
// exceptions, and the task with its output grammar.
inline constexpr std::string_view kClassificationEn =
    R"(A text in Spanish from 19th-century Latin American press will be received.
This text may or may not contain some form of irony, meaning it fulfills one of the following situations:
- It presents a contradiction between the reality described in the context and what is said.
- It presents a contradiction between the historical reality of 19th-century Latin America and what is said.
- It presents a contradiction between what is said and the tone in which it is said (based on the use of capitalization and punctuation).

This text may contain a critique of a contradictory political or social situation that occurred, but it is not necessarily ironic; it could be a negative political opinion.
The text may also contain contradictory comparisons or hyperboles, but it is not necessarily ironic; it could be an expression with poetic language. For it to be an ironic contradiction, there must be an intent of humor or mockery in the text, not merely an intent of political critique or contradiction or an intent of figurative or poetic description.

The task is to identify whether there is irony present in any contradiction in the text and explain why it is contradictory and what the author's intention is. If no irony is detected, you must explain why it is not irony and indicate whether the text has a positive, negative, or neutral sentiment.
The response must begin with one of these 4 words based on the inference: "IRONY," "POSITIVE," "NEGATIVE," "NEUTRAL," written in single quotation marks (''). Next, the explanation of what the contradiction is (if ironic) or why it is not irony must be added between asterisks (*).
You must not include anything beyond what is requested. The final response must not exceed 500 words, including the description.

Text:
{{TEXT}})";

inline constexpr std::string_view kClassificationEs =
    R"(Se recibirá un texto en español de la prensa latinoamericana del siglo XIX.
Este texto puede o no contener alguna forma de ironía, es decir, que cumple alguna de las siguientes situaciones:
- Presenta una contradicción entre la realidad descrita en el contexto y lo que se dice.
- Presenta una contradicción entre la realidad histórica de la Latinoamérica del siglo XIX y lo que se dice.
- Presenta una contradicción entre lo que se dice y el tono en que se dice (a partir del uso de mayúsculas y signos de puntuación).

Este texto puede contener una crítica a una situación política o social contradictoria que ocurrió, pero no necesariamente es irónico; puede tratarse de una opinión política negativa.
El texto también puede contener comparaciones contradictorias o hipérboles, pero no necesariamente es irónico; puede tratarse de una expresión con lenguaje poético. Para que sea una contradicción irónica debe existir una intención de humor o burla en el texto, no simplemente una intención de crítica política o de contradicción, ni una intención de descripción figurada o poética.

La tarea es identificar si hay ironía presente en alguna contradicción del texto y explicar por qué es contradictoria y cuál es la intención del autor. Si no se detecta ironía, debes explicar por qué no es ironía e indicar si el texto tiene un sentimiento positivo, negativo o neutro.
La respuesta debe comenzar con una de estas 4 palabras según la inferencia: "IRONÍA", "POSITIVO", "NEGATIVO", "NEUTRO", escrita entre comillas simples (''). A continuación, se debe agregar entre asteriscos (*) la explicación de cuál es la contradicción (si es irónico) o de por qué no es ironía.
No debes incluir nada más allá de lo solicitado. La respuesta final no debe superar las 500 palabras, incluyendo la descripción.

Texto:
{{TEXT}})";

inline constexpr std::string_view kEnhancementEs =
    "Expande este texto de manera de que mantenga su significado original, se debe hacer mucho "
    "énfasis en la carga emocional del texto, de manera que la versión final obtenida permita una "
    "mejor identificación del sentimiento general del mismo. Únicamente responde con el texto "
    "expandido y esfuérzate por conservar la sintaxis y morfología del español latinoamericano del "
    "siglo 19\n\n{{TEXT}}";

inline constexpr std::string_view kEnhancementEn =
    "Expand this text while preserving its original meaning, placing a strong emphasis on its "
    "emotional content to enhance the identification of its overall sentiment. Respond only with "
    "the expanded text, and strive to maintain the syntax and morphology characteristic of "
    "19th-century Latin American Spanish.\n\n{{TEXT}}";

}  // namespace prompts

class PromptTemplate {
 public:
  PromptTemplate(PromptKind kind, Language language, std::string body)
      : kind_(kind), language_(language), body_(std::move(body)) {
    std::size_t n = 0;
    for (auto pos = body_.find(kTextPlaceholder); pos != std::string::npos;
         pos = body_.find(kTextPlaceholder, pos + kTextPlaceholder.size())) {
      ++n;
    }
    if (n != 1) {
      throw Error(ErrorCode::ConfigError, "prompt template needs exactly one {{TEXT}} placeholder");
    }
  }

  static PromptTemplate builtin(PromptKind kind, Language language = Language::Es) {
    std::string_view body;
    if (kind == PromptKind::Classification) {
      body = language == Language::Es ? prompts::kClassificationEs : prompts::kClassificationEn;
    } else {
      body = language == Language::Es ? prompts::kEnhancementEs : prompts::kEnhancementEn;
    }
    return PromptTemplate(kind, language, std::string(body));
  }

  /// Plain-text template file with a single {{TEXT}} placeholder.
  static PromptTemplate from_file(const std::string& path, PromptKind kind, Language language) {
    return PromptTemplate(kind, language, detail::read_file(path));
  }

  std::string render(std::string_view text) const {
    if (detail::trim(text).empty()) throw Error(ErrorCode::EmptyText, "cannot render empty text");
    const auto pos = body_.find(kTextPlaceholder);
    std::string out;
    out.reserve(body_.size() + text.size());
    out.append(body_, 0, pos);
    out.append(text);
    out.append(body_, pos + kTextPlaceholder.size());
    return out;
  }

  PromptKind kind() const { return kind_; }
  Language language() const { return language_; }
  const std::string& body() const { return body_; }

 private:
  PromptKind kind_;
  Language language_;
  std::string body_;
};

inline std::string render_classification_prompt(const Entry& entry, Language language = Language::Es) {
  return PromptTemplate::builtin(PromptKind::Classification, language).render(entry.text);
}

inline std::string render_enhancement_prompt(const Entry& entry, Language language = Language::Es) {
  return PromptTemplate::builtin(PromptKind::Enhancement, language).render(entry.text);
}

}  // namespace ironia
