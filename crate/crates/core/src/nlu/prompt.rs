use crate::schema::DomainSchema;

const WORKED_EXAMPLE: &str = include_str!("../../resources/extraction_example_v1.txt");

/// Appended to the prompt when the previous reply could not be parsed.
pub const FORMAT_REMINDER: &str = "\nReminder: answer with the dictionary only. One `'key': 'value'` entry per line, enclosed in braces, with no other text, quotes or code fences around it.";

/// Builds the slot-extraction prompt for one utterance. Deterministic for
/// fixed inputs; contains one instruction block per extraction slot.
pub fn build_extraction_prompt(schema: &DomainSchema, utterance: &str) -> String {
    let domain = &schema.domain;
    let mut prompt = format!(
        "Understanding User Input and Slot Extraction for user Queries in {domain} domain\n"
    );

    for slot in schema.extraction_slots() {
        let name = &slot.caption;
        let configs = format!("[{}]", slot.permitted.join(", "));
        prompt.push_str(&format!(
            "Instructions for Extraction of {name} which indicate {}:\n",
            slot.characterization
        ));
        prompt.push_str(&format!(
            "- Provided a list of {name}-domain values: {configs}\n"
        ));
        prompt.push_str(&format!(
            "- Extract {name} values from the query \"{utterance}\" excluding any prefixes or suffixes like {name}.\n"
        ));
        prompt.push_str(&format!(
            "- If the {name}-domain list is empty, assign the extracted {name} value to the {name}-variable and {name}-wrong-or-out-of-domain is 'None'.\n"
        ));
        prompt.push_str(&format!(
            "- Otherwise, if and only if at least one extracted {name} value exists with the same spelling in the {name}-domain list {configs} (ignoring case differences and {name} prefixes or suffixes, and treating numbers written in letters and in digits as the same), assign it to the {name}-variable and {name}-wrong-or-out-of-domain is 'None' (not null).\n"
        ));
        prompt.push_str(&format!(
            "- Otherwise, if the {name}-domain list is not empty and there are extracted {name} values in the query but none of them exists in {configs} under the same rules, the {name}-variable is 'None' and the extracted wrong or out-of-domain value goes in {name}-wrong-or-out-of-domain.\n"
        ));
    }

    prompt.push_str(
        "Put the information of the variables in a Python dictionary and only display the dictionary (without any surrounding characters like triple quotes (''') or code block delimiters) as output. The output dictionary holds the information of one variable in each line; the information of each variable includes: ",
    );
    let mut text_part_instruction = format!(
        "Extract all attributes of {domain} from \"{utterance}\" and put them in text_part-variable, then remove the stop-words and the "
    );
    for slot in schema.extraction_slots() {
        let name = &slot.caption;
        prompt.push_str(&format!(
            "{name} and the value of {name}-variable extracted from the query (without any change, for example do not change \"None\" to other forms like null), {name}-wrong-or-out-of-domain and its value, "
        ));
        text_part_instruction.push_str(&format!(
            "{name}-variable, and prefixes and suffixes such as {name}, "
        ));
    }
    text_part_instruction.push_str(
        "from the text_part-variable; put one extra line in the output for text_part which consists of \"text_part: text_part_value\".\n",
    );
    prompt.push('\n');
    prompt.push_str(&text_part_instruction);
    prompt.push_str(WORKED_EXAMPLE);
    prompt
}
