use super::BlockRole;

// back, home, confirm, next, prev
const NAV: &[(&str, [&str; 5])] = &[
    ("en", ["Back", "Home", "Confirm", "Next", "Previous"]),
    ("es", ["Atrás", "Inicio", "Confirmar", "Siguiente", "Anterior"]),
    ("fr", ["Retour", "Accueil", "Confirmer", "Suivant", "Précédent"]),
    ("de", ["Zurück", "Start", "Bestätigen", "Weiter", "Vorherige"]),
    ("it", ["Indietro", "Home", "Conferma", "Avanti", "Precedente"]),
    ("pt", ["Voltar", "Início", "Confirmar", "Próximo", "Anterior"]),
    ("nl", ["Terug", "Start", "Bevestigen", "Volgende", "Vorige"]),
    ("ru", ["Назад", "Домой", "Подтвердить", "Далее", "Предыдущая"]),
    ("zh", ["返回", "主页", "确认", "下一页", "上一页"]),
    ("ja", ["戻る", "ホーム", "確認", "次へ", "前へ"]),
    ("ko", ["뒤로", "홈", "확인", "다음", "이전"]),
];

/// Navigation label in `language` (primary subtag), English when unknown.
pub fn navigation_label(role: BlockRole, language: &str) -> &'static str {
    let primary = language.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
    let row = NAV
        .iter()
        .find(|(code, _)| *code == primary)
        .map(|(_, labels)| labels)
        .unwrap_or(&NAV[0].1);
    match role {
        BlockRole::Back => row[0],
        BlockRole::Home => row[1],
        BlockRole::Confirm => row[2],
        BlockRole::Next => row[3],
        BlockRole::Prev => row[4],
        BlockRole::Action => "",
    }
}
