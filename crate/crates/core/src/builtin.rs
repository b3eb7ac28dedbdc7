//! Predefined metric sets used by the command line.
//!
//! Every metric here is written against the public [`ParsedCommit`] /
//! [`CstNode`] API. Grammar node-type names live only in the tables of this
//! module so a grammar upgrade touches one place.

use crate::cst::{Aggregate, CstNode, Language, ParsedCommit};
use crate::engine::{EngineError, MetricDef, MetricEvaluator, MetricRegistry, MetricValue};

/// Node-type names per grammar, as pinned in the manifest.
pub mod names {
    pub mod python {
        pub const DATA_STRUCTURES: &[&str] = &["dictionary", "list", "set", "tuple"];
        pub const LOOPS: &[&str] = &["for_statement", "while_statement"];
        pub const DEFINITIONS: &[&str] = &["class_definition", "function_definition"];
        pub const FUNCTION: &str = "function_definition";
        pub const DECORATED: &str = "decorated_definition";
        pub const DECORATOR: &str = "decorator";
        pub const PARAMETERS: &str = "parameters";
        /// Parameter node types and the label each is charted under.
        pub const PARAMETER_KINDS: &[(&str, &str)] = &[
            ("identifier", "plain"),
            ("default_parameter", "default"),
            ("typed_parameter", "typed"),
            ("typed_default_parameter", "typed_default"),
            ("list_splat_pattern", "*args"),
            ("dictionary_splat_pattern", "**kwargs"),
        ];
        pub const FUNCTIONAL: &[&str] = &[
            "lambda",
            "yield",
            "generator_expression",
            "list_comprehension",
            "dictionary_comprehension",
            "set_comprehension",
        ];
    }

    pub mod javascript {
        pub const LEXICAL_DECLARATION: &str = "lexical_declaration";
        pub const VARIABLE_DECLARATION: &str = "variable_declaration";
        pub const DECLARATION_KEYWORDS: &[&str] = &["const", "let", "var"];
        pub const FUNCTION_STYLES: &[&str] = &[
            "arrow_function",
            "function_declaration",
            "function_expression",
            "generator_function_declaration",
            "generator_function",
        ];
        /// Everything that can carry an `async` modifier.
        pub const ASYNC_CAPABLE: &[&str] = &[
            "arrow_function",
            "function_declaration",
            "function_expression",
            "generator_function_declaration",
            "generator_function",
            "method_definition",
        ];
        pub const CLASSES: &[&str] = &["class_declaration", "class"];
        pub const LOOPS: &[&str] = &[
            "for_statement",
            "for_in_statement",
            "while_statement",
            "do_statement",
        ];
    }

    pub mod typescript {
        pub const CLASSES: &[&str] = &["class_declaration", "abstract_class_declaration", "class"];
        pub const TYPE_DECLARATIONS: &[&str] = &[
            "interface_declaration",
            "type_alias_declaration",
            "enum_declaration",
        ];
    }

    pub mod java {
        pub const TYPE_DECLARATIONS: &[&str] = &[
            "class_declaration",
            "interface_declaration",
            "enum_declaration",
            "record_declaration",
        ];
        pub const METHOD: &str = "method_declaration";
        pub const LOOPS: &[&str] = &[
            "for_statement",
            "enhanced_for_statement",
            "while_statement",
            "do_statement",
        ];
        pub const LAMBDA: &str = "lambda_expression";
    }
}

/// Every node type queried by the builtin metrics of `language`.
pub fn node_types(language: Language) -> Vec<&'static str> {
    use names::*;
    let mut types: Vec<&'static str> = match language {
        Language::Python => [
            python::DATA_STRUCTURES,
            python::LOOPS,
            python::DEFINITIONS,
            &[python::DECORATED, python::DECORATOR, python::PARAMETERS],
            python::FUNCTIONAL,
        ]
        .concat()
        .into_iter()
        .chain(python::PARAMETER_KINDS.iter().map(|(t, _)| *t))
        .collect(),
        Language::Javascript | Language::Typescript => {
            let mut t = [
                &[
                    javascript::LEXICAL_DECLARATION,
                    javascript::VARIABLE_DECLARATION,
                ][..],
                javascript::ASYNC_CAPABLE,
                javascript::LOOPS,
            ]
            .concat();
            if language == Language::Typescript {
                t.extend_from_slice(typescript::CLASSES);
                t.extend_from_slice(typescript::TYPE_DECLARATIONS);
            } else {
                t.extend_from_slice(javascript::CLASSES);
            }
            t
        }
        Language::Java => [
            java::TYPE_DECLARATIONS,
            &[java::METHOD, java::LAMBDA],
            java::LOOPS,
        ]
        .concat(),
    };
    let mut seen = std::collections::HashSet::new();
    types.retain(|t| seen.insert(*t));
    types
}

/// Path heuristic for test files: a `test`/`tests` directory, a `test_`
/// prefix, or a stem ending in `_test`, `.test` or `.spec`.
pub fn is_test_file(path: &str) -> bool {
    let mut segments: Vec<&str> = path.split('/').collect();
    let file_name = segments.pop().unwrap_or("");
    if segments.iter().any(|s| *s == "test" || *s == "tests") {
        return true;
    }
    if file_name.starts_with("test_") {
        return true;
    }
    let stem = file_name
        .rsplit_once('.')
        .map(|(stem, _)| stem)
        .unwrap_or(file_name);
    stem.ends_with("_test") || stem.ends_with(".test") || stem.ends_with(".spec")
}

/// The predefined metrics of one language, in chart order.
pub struct BuiltinSet {
    pub language: Language,
    pub metrics: Vec<MetricEvaluator>,
}

impl BuiltinSet {
    pub fn names(&self) -> Vec<&str> {
        self.metrics.iter().map(|m| m.def().name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&MetricEvaluator> {
        self.metrics.iter().find(|m| m.def().name == name)
    }

    pub fn into_registry(self) -> Result<MetricRegistry, EngineError> {
        let mut registry = MetricRegistry::new();
        for metric in self.metrics {
            registry.register_evaluator(metric)?;
        }
        Ok(registry)
    }
}

fn numeric<F>(name: &str, f: F) -> MetricEvaluator
where
    F: Fn(&ParsedCommit) -> f64 + Send + Sync + 'static,
{
    MetricEvaluator::new(MetricDef::numeric(name), move |pc| {
        Ok(MetricValue::Number(f(pc)))
    })
}

fn median<F>(name: &str, f: F) -> MetricEvaluator
where
    F: Fn(&ParsedCommit) -> f64 + Send + Sync + 'static,
{
    MetricEvaluator::new(
        MetricDef::numeric(name).with_aggregate(Aggregate::Median),
        move |pc| Ok(MetricValue::Number(f(pc))),
    )
}

fn categorical<F>(name: &str, f: F) -> MetricEvaluator
where
    F: Fn(&ParsedCommit) -> Vec<String> + Send + Sync + 'static,
{
    MetricEvaluator::new(MetricDef::categorical(name), move |pc| {
        Ok(MetricValue::Labels(f(pc)))
    })
}

fn node_types_metric(name: &str, types: &'static [&'static str]) -> MetricEvaluator {
    categorical(name, move |pc| pc.find_node_types(types))
}

fn count_metric(name: &str, types: &'static [&'static str]) -> MetricEvaluator {
    numeric(name, move |pc| pc.count_nodes(types) as f64)
}

fn has_token(node: &CstNode<'_>, keyword: &str) -> bool {
    node.tokens()
        .iter()
        .any(|t| !t.is_named() && t.type_name() == keyword)
}

fn common_metrics() -> Vec<MetricEvaluator> {
    vec![
        numeric("Lines of code", |pc| pc.loc() as f64),
        numeric("Source files", |pc| pc.files().len() as f64),
        numeric("Test files", |pc| {
            pc.files().iter().filter(|f| is_test_file(f.path())).count() as f64
        }),
        median("LOC per file", |pc| {
            let locs: Vec<f64> = pc.files().iter().map(|f| f.loc() as f64).collect();
            Aggregate::Median.apply(&locs)
        }),
    ]
}

/// Python functions carrying a decorator whose text starts with `prefix`.
pub fn decorated_functions(pc: &ParsedCommit, prefix: &str) -> usize {
    use names::python::*;
    pc.nodes_matching(|n| {
        n.type_name() == DECORATED
            && n.child_by_field("definition")
                .is_some_and(|d| d.type_name() == FUNCTION)
            && n.children()
                .iter()
                .any(|c| c.type_name() == DECORATOR && c.text().starts_with(prefix))
    })
    .len()
}

fn python_metrics() -> Vec<MetricEvaluator> {
    use names::python::*;
    vec![
        node_types_metric("Data structures", DATA_STRUCTURES),
        node_types_metric("Loops", LOOPS),
        node_types_metric("Classes and functions", DEFINITIONS),
        median("LOC per function", |pc| {
            pc.loc_by_type(FUNCTION, Aggregate::Median)
        }),
        categorical("Function parameters", |pc| {
            pc.nodes_matching(|n| n.type_name() == PARAMETERS)
                .iter()
                .flat_map(|params| params.children())
                .filter_map(|p| {
                    PARAMETER_KINDS
                        .iter()
                        .find(|(t, _)| *t == p.type_name())
                        .map(|(_, label)| label.to_string())
                })
                .collect()
        }),
        numeric("Async functions", |pc| {
            pc.nodes_matching(|n| {
                n.type_name() == FUNCTION
                    && n.tokens().first().is_some_and(|t| t.type_name() == "async")
            })
            .len() as f64
        }),
        numeric("@pytest decorated functions", |pc| {
            decorated_functions(pc, "@pytest") as f64
        }),
        node_types_metric("Functional features", FUNCTIONAL),
    ]
}

fn declaration_keyword(node: &CstNode<'_>) -> Option<&'static str> {
    use names::javascript::*;
    if node.type_name() != LEXICAL_DECLARATION && node.type_name() != VARIABLE_DECLARATION {
        return None;
    }
    node.tokens()
        .iter()
        .filter(|t| !t.is_named())
        .map(|t| t.type_name())
        .find(|kind| DECLARATION_KEYWORDS.contains(kind))
}

fn script_metrics(language: Language) -> Vec<MetricEvaluator> {
    use names::javascript::*;
    let classes = if language == Language::Typescript {
        names::typescript::CLASSES
    } else {
        CLASSES
    };
    let mut metrics = vec![
        categorical("Variable declarations", |pc| {
            pc.named_nodes()
                .filter_map(|n| declaration_keyword(&n))
                .map(str::to_string)
                .collect()
        }),
        node_types_metric("Function styles", FUNCTION_STYLES),
        numeric("Async functions", |pc| {
            pc.nodes_matching(|n| ASYNC_CAPABLE.contains(&n.type_name()) && has_token(n, "async"))
                .len() as f64
        }),
        count_metric("Classes", classes),
        node_types_metric("Loops", LOOPS),
    ];
    if language == Language::Typescript {
        metrics.push(node_types_metric(
            "Type declarations",
            names::typescript::TYPE_DECLARATIONS,
        ));
    }
    metrics
}

fn java_metrics() -> Vec<MetricEvaluator> {
    use names::java::*;
    vec![
        node_types_metric("Type declarations", TYPE_DECLARATIONS),
        numeric("Methods", |pc| pc.count_nodes(&[METHOD]) as f64),
        median("LOC per method", |pc| {
            pc.loc_by_type(METHOD, Aggregate::Median)
        }),
        node_types_metric("Loops", LOOPS),
        numeric("Lambdas", |pc| pc.count_nodes(&[LAMBDA]) as f64),
    ]
}

/// The CLI's metric catalog for `language`.
pub fn builtin_set(language: Language) -> BuiltinSet {
    let mut metrics = common_metrics();
    metrics.extend(match language {
        Language::Python => python_metrics(),
        Language::Javascript | Language::Typescript => script_metrics(language),
        Language::Java => java_metrics(),
    });
    BuiltinSet { language, metrics }
}
